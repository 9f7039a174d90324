"""Continuum projection, ionization probability, ATI spectrum and 2-D PAD."""
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import find_peaks

from . import _accel
from ._accel import njit, prange
from .errors import InvalidArgument, OutOfRange, UnsupportedConfiguration
from .pulse import EV_PER_HARTREE
from .specfun import legendre_P_all


@dataclass(eq=False)
class ContinuumPacket:
    g: np.ndarray
    grid: object = field(repr=False)


@dataclass(eq=False)
class ATISpectrum:
    energy: np.ndarray  # hartree, ascending
    dpde: np.ndarray

    def integral(self):
        return float(_trapz(self.dpde, self.energy))


@dataclass(eq=False)
class PAD:
    p_par: np.ndarray
    p_perp: np.ndarray
    density: np.ndarray  # shape (len(p_par), len(p_perp))

    def integral(self):
        inner = _trapz(self.density, self.p_perp, axis=1)
        return float(_trapz(inner, self.p_par))


@dataclass(eq=False)
class SpectrumResult:
    ati: ATISpectrum
    pad: PAD
    probability: float


def _trapz(y, x, axis=-1):
    return np.trapezoid(y, x, axis=axis)


def project_out_bound(wp, eigenset):
    """g_l = f_l - sum_n chi_nl <chi_nl | f_l> over bound states (E < 0)."""
    if not wp.grid.same_as(eigenset.grid):
        raise InvalidArgument("wavepacket and eigenset live on different grids")
    if wp.l_max > eigenset.l_max:
        raise InvalidArgument("eigenset does not cover the wavepacket's l range")
    w = wp.grid.quad_weights
    g = wp.coeffs.copy()
    for l in range(wp.l_max + 1):
        lev = eigenset[l]
        if lev.bound_count:
            B = lev.bound_chi
            g[l] -= B.T @ (B @ (w * g[l]))
    return ContinuumPacket(g, wp.grid)


def ionization_probability(cp):
    w = cp.grid.quad_weights
    return float(np.sum(w[None, :] * np.abs(cp.g) ** 2))


def ati_spectrum(cp, energies=None):
    """dP/d(eps) = sum_l |g_l(p)|^2 / p at eps = p^2 / 2.

    With ``energies`` the spectrum is resampled there by cardinal
    interpolation; otherwise it is returned on the native grid.
    """
    if energies is None:
        p = cp.grid.p_nodes
        dens = np.sum(np.abs(cp.g) ** 2, axis=0) / p
        return ATISpectrum(0.5 * p * p, dens)
    energies = np.asarray(energies, dtype=float)
    p = np.sqrt(2.0 * energies)
    vals = interpolate_radial(cp.grid, cp.g.T, p)  # (n, L+1)
    return ATISpectrum(energies, np.sum(np.abs(vals) ** 2, axis=1) / p)


# ---------------------------------------------------------------- cardinal interpolation

# T_N(x) / (T_N'(x_j)(x - x_j)) in theta = arccos(x), written as a product of
# two Dirichlet ratios so that nothing cancels when x sits on (or next to) a node:
#   cos(N t) - cos(N t_j)     sin(N(t + t_j)/2)   sin(N(t - t_j)/2)
#   ---------------------  =  ----------------- * -----------------
#     cos(t) - cos(t_j)        sin((t + t_j)/2)     sin((t - t_j)/2)

def _node_angles(N):
    """theta_j of the ascending Chebyshev nodes and 1 / T_N'(x_j)."""
    k = np.arange(N)
    theta = (2 * (N - k) - 1) * np.pi / (2 * N)
    sign = np.where((N - k - 1) % 2 == 0, 1.0, -1.0)
    return theta, np.sin(theta) * sign / N


@njit
def _dirichlet(N, half):
    s = np.sin(half)
    if abs(s) < 1e-300 or abs(half) < 1e-8:
        # sin(N h) / sin(h) = N (1 - (N^2 - 1) h^2 / 6 + ...)
        return N * (1.0 - (N * N - 1.0) * half * half / 6.0)
    return np.sin(N * half) / s


@njit(parallel=True)
def _cardinal_matrix_jit(theta_nodes, inv_dT, theta, N):
    M = np.empty((theta.size, N))
    for i in prange(theta.size):
        t = theta[i]
        for j in range(N):
            M[i, j] = (_dirichlet(N, 0.5 * (t + theta_nodes[j]))
                       * _dirichlet(N, 0.5 * (t - theta_nodes[j])) * inv_dT[j])
    return M


def _dirichlet_numpy(N, half):
    s = np.sin(half)
    small = np.abs(half) < 1e-8
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.sin(N * half) / s
    return np.where(small, N * (1.0 - (N * N - 1.0) * half * half / 6.0), out)


def _cardinal_matrix_numpy(theta_nodes, inv_dT, theta, N):
    a = 0.5 * (theta[:, None] + theta_nodes[None, :])
    b = 0.5 * (theta[:, None] - theta_nodes[None, :])
    return _dirichlet_numpy(N, a) * _dirichlet_numpy(N, b) * inv_dT[None, :]


def cardinal_matrix(grid, p):
    """Rows of g_j(x(p)) = T_N(x) / (T_N'(x_j) (x - x_j))."""
    p = np.atleast_1d(np.asarray(p, dtype=float))
    if np.any(p <= 0.0) or np.any(p > grid.p_max * (1 + 1e-14)):
        raise OutOfRange(f"interpolation momentum outside (0, {grid.p_max}]")
    N = grid.n_points
    x = np.clip(grid.mapping.x_of_p(p), -1.0, 1.0)
    theta = np.arccos(x)
    theta_nodes, inv_dT = _node_angles(N)
    # x_of_p(p_j) can miss x_j by an ulp, which arccos amplifies near x = +-1;
    # such points get the exact cardinal row
    near = np.clip(np.rint(N - 0.5 - N * theta / np.pi).astype(int), 0, N - 1)
    snap = np.abs(x - grid.x_nodes[near]) <= 4 * np.spacing(1.0)
    if _accel.USE_JIT:
        M = _cardinal_matrix_jit(theta_nodes, inv_dT, theta, N)
    else:
        M = _cardinal_matrix_numpy(theta_nodes, inv_dT, theta, N)
    rows = np.nonzero(snap)[0]
    M[rows] = 0.0
    M[rows, near[rows]] = 1.0
    return M


def interpolate_radial(grid, samples, p, chunk=4096):
    """Evaluate a radial function known on the grid at off-grid momenta.

    The expansion is done for u(x) = chi(p(x)) sqrt(p'(x)); ``samples`` has
    the grid along axis 0 and may carry further axes.
    """
    samples = np.asarray(samples)
    if samples.shape[0] != grid.n_points:
        raise InvalidArgument("samples do not match the grid")
    p = np.atleast_1d(np.asarray(p, dtype=float))
    root = np.sqrt(grid.dp_dx)
    u = samples * root.reshape((-1,) + (1,) * (samples.ndim - 1))
    out = np.empty((p.size,) + samples.shape[1:], dtype=np.result_type(samples, float))
    for s in range(0, p.size, chunk):
        pc = p[s: s + chunk]
        C = cardinal_matrix(grid, pc)
        vals = np.tensordot(C, u, axes=(1, 0))
        scale = np.sqrt(grid.mapping.dp_dx(grid.mapping.x_of_p(pc)))
        out[s: s + chunk] = vals / scale.reshape((-1,) + (1,) * (samples.ndim - 1))
    return out


# ---------------------------------------------------------------- PAD

def angular_amplitude(cp, p, cos_theta):
    """Psi(p, theta) for an m = 0 packet at matching arrays p, cos_theta."""
    p = np.asarray(p, dtype=float)
    c = np.asarray(cos_theta, dtype=float)
    L = cp.g.shape[0] - 1
    radial = interpolate_radial(cp.grid, cp.g.T, p.ravel())  # (n, L+1)
    P = legendre_P_all(L, np.clip(c.ravel(), -1.0, 1.0))  # (L+1, n)
    norm = np.sqrt((2 * np.arange(L + 1) + 1) / (4 * np.pi))
    psi = np.einsum("nl,ln->n", radial * norm[None, :], P) / p.ravel()
    return psi.reshape(p.shape)


def pad(cp, n_par, n_perp, p_limit, m=0):
    """d^2P/(dp_par dp_perp) = 2 pi p_perp |Psi|^2 on a uniform grid.

    p_par spans [-p_limit, p_limit], p_perp spans [0, p_limit]; cells with
    p = 0 or p > p_limit are zero.
    """
    if m != 0:
        raise UnsupportedConfiguration("PAD implemented for m = 0 only")
    if not 0 < p_limit <= cp.grid.p_max:
        raise InvalidArgument("p_limit must lie in (0, p_max]")
    ppar = np.linspace(-p_limit, p_limit, int(n_par))
    pperp = np.linspace(0.0, p_limit, int(n_perp))
    PP, QQ = np.meshgrid(ppar, pperp, indexing="ij")
    p = np.hypot(PP, QQ)
    inside = (p > 0.0) & (p <= p_limit)
    dens = np.zeros_like(p)
    if np.any(inside):
        pin = p[inside]
        psi = angular_amplitude(cp, pin, PP[inside] / pin)
        dens[inside] = 2.0 * np.pi * QQ[inside] * np.abs(psi) ** 2
    return PAD(ppar, pperp, dens)


def count_zero_stripes(cp, p, n_theta=1441, depth=0.05):
    """Interior angular minima of |Psi(p, theta)|^2 deeper than ``depth`` x max."""
    theta = np.linspace(0.0, np.pi, n_theta)[1:-1]
    dens = np.abs(angular_amplitude(cp, np.full(theta.size, float(p)), np.cos(theta))) ** 2
    top = dens.max()
    if top == 0.0:
        return 0
    minima = (dens[1:-1] < dens[:-2]) & (dens[1:-1] <= dens[2:]) & (dens[1:-1] < depth * top)
    return int(np.count_nonzero(minima))


def ati_peaks(spectrum, e_min, e_max, prominence=0.5):
    """Energies of peaks in [e_min, e_max], found on log10 of the spectrum."""
    sel = (spectrum.energy >= e_min) & (spectrum.energy <= e_max)
    e = spectrum.energy[sel]
    y = np.log10(np.maximum(spectrum.dpde[sel], 1e-300))
    idx, _ = find_peaks(y, prominence=prominence)
    return e[idx]


def analyze(wp, eigenset, n_par=201, n_perp=101, p_limit=1.0, energies=None):
    cp = project_out_bound(wp, eigenset)
    return SpectrumResult(ati=ati_spectrum(cp, energies),
                          pad=pad(cp, n_par, n_perp, p_limit),
                          probability=ionization_probability(cp))


# ---------------------------------------------------------------- writers

def write_ati(spectrum, path):
    with open(path, "w") as fh:
        fh.write("# energy_au energy_eV dP_deps_per_au\n")
        for e, d in zip(spectrum.energy, spectrum.dpde):
            fh.write(f"{e:.12e} {e * EV_PER_HARTREE:.12e} {d:.12e}\n")


def write_pad(pad_result, path, binary_path=None):
    """Three-column text (p_par p_perp density); optional raw float64 matrix
    (little-endian, row-major, shape n_par x n_perp)."""
    with open(path, "w") as fh:
        fh.write(f"# p_par p_perp density  shape={pad_result.density.shape[0]}x"
                 f"{pad_result.density.shape[1]}\n")
        for i, a in enumerate(pad_result.p_par):
            for j, b in enumerate(pad_result.p_perp):
                fh.write(f"{a:.8e} {b:.8e} {pad_result.density[i, j]:.12e}\n")
            fh.write("\n")
    if binary_path is not None:
        pad_result.density.astype("<f8").tofile(binary_path)
