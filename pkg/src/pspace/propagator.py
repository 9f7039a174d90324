"""Split-operator propagation in the field-free eigenset representation (m = 0).

One step is ``exp(-i H0 dt/2) exp(-i A(t + dt/2) p_z dt) exp(-i H0 dt/2)``.
The field-free factors act per l through dense matrices built from the
eigenset; the interaction mixes l at every grid point through the Rayleigh
expansion with squared zero-projection 3j symbols.
"""
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import _accel
from ._accel import njit, prange
from .errors import InvalidArgument, NumericalFailure, UnsupportedConfiguration
from .pulse import vector_potential
from .specfun import _sph_jn_scalar, spherical_bessel_j_all, wigner3j_zero_table

log = logging.getLogger(__name__)

BESSEL_CUTOFF = 1e-16


@dataclass(eq=False)
class Wavepacket:
    """coeffs[l, j] = f_l(p_j); Psi = sum_l f_l(p) Y_l0 / p."""

    coeffs: np.ndarray
    grid: object = field(repr=False)
    t: float = 0.0
    m: int = 0

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=complex)
        if self.coeffs.ndim != 2 or self.coeffs.shape[1] != self.grid.n_points:
            raise InvalidArgument("coefficients must have shape (l_max + 1, N)")

    @property
    def l_max(self):
        return self.coeffs.shape[0] - 1

    def norm2(self):
        w = self.grid.quad_weights
        return float(np.sum(w[None, :] * np.abs(self.coeffs) ** 2))

    def population_by_l(self):
        return np.sum(self.grid.quad_weights[None, :] * np.abs(self.coeffs) ** 2, axis=1)

    def copy(self):
        return Wavepacket(self.coeffs.copy(), self.grid, self.t, self.m)

    @classmethod
    def from_state(cls, eigenset, l_max, l=0, n=1):
        """Eigenstate (n, l) of the eigenset embedded in an l <= l_max packet."""
        c = np.zeros((l_max + 1, eigenset.grid.n_points), dtype=complex)
        c[l] = eigenset[l].state(n)
        return cls(c, eigenset.grid)


@dataclass(frozen=True, eq=False)
class HalfstepMatrices:
    """A[l] = sum_n exp(-i E_nl tau) chi_nl(p_j) chi_nl(p_k) w_k for tau = dt/2
    (``half``) and tau = dt (``full``, used when adjacent half-steps merge)."""

    half: np.ndarray
    full: np.ndarray
    dt: float
    grid: object = field(repr=False)

    @property
    def l_max(self):
        return self.half.shape[0] - 1


def _spectral_matrix(level, tau):
    w = level.grid.quad_weights
    phase = np.exp(-1j * level.energies * tau)
    return level.chi.T @ (phase[:, None] * level.chi * w[None, :])


def build_halfstep_matrices(eigenset, dt, l_max=None, merged=True):
    """Field-free propagators for every l, built once outside the time loop."""
    l_max = eigenset.l_max if l_max is None else int(l_max)
    if l_max > eigenset.l_max:
        raise InvalidArgument(f"eigenset has l <= {eigenset.l_max}, need {l_max}")
    N = eigenset.grid.n_points
    half = np.empty((l_max + 1, N, N), dtype=complex)
    full = np.empty((l_max + 1, N, N), dtype=complex) if merged else None
    for l in range(l_max + 1):
        half[l] = _spectral_matrix(eigenset[l], 0.5 * dt)
        if merged:
            full[l] = _spectral_matrix(eigenset[l], dt)
    return HalfstepMatrices(half=half, full=full, dt=float(dt), grid=eigenset.grid)


def _apply_blocks(mats, coeffs, out=None):
    if out is None:
        out = np.empty_like(coeffs)
    for l in range(coeffs.shape[0]):
        np.dot(mats[l], coeffs[l], out=out[l])
    return out


def apply_field_free_halfstep(wp, mats):
    if wp.coeffs.shape[0] - 1 != mats.l_max or not wp.grid.same_as(mats.grid):
        raise InvalidArgument("wavepacket does not match the half-step matrices")
    return Wavepacket(_apply_blocks(mats.half, wp.coeffs), wp.grid, wp.t + 0.5 * mats.dt, wp.m)


# ---------------------------------------------------------------- interaction step

def coupling_table(l_max):
    """G[l, l1, l2] = (2 l1 + 1) sqrt((2l + 1)(2 l2 + 1)) (l l1 l2; 0 0 0)^2."""
    k_max = 2 * l_max
    t3 = wigner3j_zero_table(l_max, k_max)
    l = np.arange(l_max + 1)
    l1 = np.arange(k_max + 1)
    pref = (2 * l1 + 1)[None, :, None] * np.sqrt(np.outer(2 * l + 1, 2 * l + 1))[:, None, :]
    return np.ascontiguousarray(pref * t3 * t3)


@njit(parallel=True)
def _interaction_jit(f, p, adt, G):
    L1, N = f.shape
    kmax = G.shape[1] - 1
    out = np.empty_like(f)
    for j in prange(N):
        x = adt * p[j]
        buf = np.empty(kmax + 1)
        _sph_jn_scalar(kmax, abs(x), buf)
        kcut = 0
        for k in range(kmax, -1, -1):
            if abs(buf[k]) >= BESSEL_CUTOFF:
                kcut = k
                break
        c = np.empty(kcut + 1, dtype=np.complex128)
        ph = 1.0 + 0.0j
        for k in range(kcut + 1):
            v = buf[k]
            if x < 0.0 and k % 2 == 1:
                v = -v
            c[k] = ph * v
            ph *= -1j
        for l in range(L1):
            acc = 0.0 + 0.0j
            for l2 in range(L1):
                fl2 = f[l2, j]
                if fl2 == 0.0:
                    continue
                lo = abs(l - l2)
                hi = min(l + l2, kcut)
                s = 0.0 + 0.0j
                for l1 in range(lo, hi + 1, 2):
                    s += c[l1] * G[l, l1, l2]
                acc += s * fl2
            out[l, j] = acc
    return out


def _interaction_numpy(f, p, adt, G):
    kmax = G.shape[1] - 1
    x = adt * p
    jk = spherical_bessel_j_all(kmax, np.abs(x))  # (N, K+1)
    k = np.arange(kmax + 1)
    jk = jk * np.where((x[:, None] < 0) & (k[None, :] % 2 == 1), -1.0, 1.0)
    alive = np.any(np.abs(jk) >= BESSEL_CUTOFF, axis=0)
    kcut = int(np.nonzero(alive)[0].max()) if np.any(alive) else 0
    c = ((-1j) ** k[: kcut + 1])[None, :] * jk[:, : kcut + 1]
    c = np.where(np.abs(jk[:, : kcut + 1]) >= 0.0, c, 0.0)
    M = np.einsum("jk,lkm->jlm", c, G[:, : kcut + 1, :], optimize=True)
    return np.einsum("jlm,mj->lj", M, f, optimize=True)


class Interaction:
    """exp(-i a p cos(theta) dt) on the l <= l_max block, m = 0."""

    def __init__(self, l_max, grid):
        self.l_max = int(l_max)
        self.grid = grid
        self.G = coupling_table(self.l_max)
        self._p = np.ascontiguousarray(grid.p_nodes)

    def apply(self, coeffs, a_mid, dt):
        if a_mid == 0.0:
            return coeffs.copy()
        adt = float(a_mid) * float(dt)
        if _accel.USE_JIT:
            return _interaction_jit(coeffs, self._p, adt, self.G)
        return _interaction_numpy(coeffs, self._p, adt, self.G)


def apply_interaction(wp, a_mid, dt, interaction=None):
    if wp.m != 0:
        raise UnsupportedConfiguration("only m = 0 is implemented")
    interaction = interaction or Interaction(wp.l_max, wp.grid)
    return Wavepacket(interaction.apply(wp.coeffs, a_mid, dt), wp.grid, wp.t, wp.m)


# ---------------------------------------------------------------- time loop

@dataclass
class PropagationState:
    """Loop state after ``step`` completed iterations.

    With merged half-steps the coefficients of an unfinished run are ahead of
    ``step * dt`` by one field-free half-step.
    """

    coeffs: np.ndarray
    step: int
    n_steps: int
    dt: float
    merged: bool = True

    @property
    def finished(self):
        return self.step >= self.n_steps


def step_count(duration, dt):
    """Integer step count with dt adjusted to divide the pulse exactly."""
    if not dt > 0:
        raise InvalidArgument("dt must be positive")
    n = max(1, int(round(duration / dt)))
    return n, duration / n


def bound_populations(eigenset, coeffs):
    """(ground-state population, total bound population) of a packet."""
    w = eigenset.grid.quad_weights
    ground = 0.0
    total = 0.0
    for l in range(min(coeffs.shape[0], eigenset.l_max + 1)):
        lev = eigenset[l]
        if lev.bound_count == 0:
            continue
        amp = lev.bound_chi @ (w * coeffs[l])
        pops = np.abs(amp) ** 2
        total += float(np.sum(pops))
        if l == 0:
            ground = float(pops[0])
    return ground, total


def propagate(wp0, eigenset, pulse, dt, observer=None, observer_stride=100,
              merge_halfsteps=True, mats=None, resume=None, checkpoint=None,
              checkpoint_stride=0, stop_after=None):
    """March ``wp0`` over the whole pulse and return the packet at t = T.

    ``observer(step, t, norm, ground_pop, bound_pop)`` runs every
    ``observer_stride`` steps. ``checkpoint(state)`` receives a
    ``PropagationState`` every ``checkpoint_stride`` steps; pass such a state
    as ``resume`` to continue bit-identically. ``stop_after`` ends the loop
    early (after that many total steps) and returns the partial state.
    """
    if wp0.m != 0:
        raise UnsupportedConfiguration("only m = 0 is implemented")
    n_steps, dt = step_count(pulse.duration, dt)
    l_max = wp0.l_max
    if mats is None:
        mats = build_halfstep_matrices(eigenset, dt, l_max, merged=merge_halfsteps)
    elif abs(mats.dt - dt) > 1e-15 * dt or mats.l_max != l_max:
        raise InvalidArgument("half-step matrices do not match dt or l_max")
    if merge_halfsteps and mats.full is None:
        raise InvalidArgument("merged propagation needs full-step matrices")
    inter = Interaction(l_max, wp0.grid)
    w = wp0.grid.quad_weights

    if resume is not None:
        if resume.n_steps != n_steps or abs(resume.dt - dt) > 1e-15 * dt:
            raise InvalidArgument("resume state belongs to a different time grid")
        if resume.merged != merge_halfsteps:
            raise InvalidArgument("resume state was produced with a different step scheme")
        f = resume.coeffs.copy()
        start = resume.step
        if resume.finished:
            return Wavepacket(f, wp0.grid, pulse.duration, 0)
    else:
        f = wp0.coeffs.copy()
        start = 0
        if merge_halfsteps:
            f = _apply_blocks(mats.half, f)
    buf = np.empty_like(f)
    last = n_steps if stop_after is None else min(n_steps, int(stop_after))

    def report(k, coeffs):
        norm = float(np.sum(w[None, :] * (coeffs.real**2 + coeffs.imag**2)))
        if not math.isfinite(norm):
            raise NumericalFailure(f"non-finite wavepacket at step {k}", index=k)
        if observer is not None:
            ground, bound = bound_populations(eigenset, coeffs)
            observer(k, k * dt, norm, ground, bound)

    if start == 0 and observer is not None:
        report(0, f)
    for k in range(start, last):
        a_mid = float(vector_potential(pulse, (k + 0.5) * dt))
        if merge_halfsteps:
            f = inter.apply(f, a_mid, dt)
            if k < n_steps - 1:
                _apply_blocks(mats.full, f, out=buf)
            else:
                _apply_blocks(mats.half, f, out=buf)
            f, buf = buf, f
        else:
            _apply_blocks(mats.half, f, out=buf)
            f = inter.apply(buf, a_mid, dt)
            _apply_blocks(mats.half, f, out=buf)
            f, buf = buf, f
        done = k + 1
        if observer_stride and (done % observer_stride == 0 or done == n_steps):
            report(done, f)
        if checkpoint is not None and checkpoint_stride and done % checkpoint_stride == 0:
            checkpoint(PropagationState(f.copy(), done, n_steps, dt, merge_halfsteps))
    if not np.all(np.isfinite(f)):
        raise NumericalFailure(f"non-finite wavepacket at step {last}", index=last)
    if last < n_steps:
        return PropagationState(f, last, n_steps, dt, merge_halfsteps)
    return Wavepacket(f, wp0.grid, pulse.duration, 0)
