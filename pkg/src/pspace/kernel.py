"""Momentum-space potential kernel and its Legendre projections.

The angular integral over xi = cos(theta) is carried out in the momentum
transfer Q = |p - q| (``Q^2 = p^2 + q^2 - 2 p q xi``). Composite
Gauss-Legendre panels in Q have all nodes strictly inside
``(|p - q|, p + q)``, i.e. strictly inside xi in (-1, 1), so the
zero-momentum-transfer point xi = 1 is never touched. In Q the truncated
Coulomb factor ``(cos(Q R_m) - 1) / Q`` is bounded and oscillates with a
fixed period ``2 pi / R_m``, which sizes the panels.
"""
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import _accel
from ._accel import njit, prange
from .errors import InvalidArgument
from .specfun import _sph_jn_scalar, gauss_legendre

HELIUM_SAE = (1.231, 0.662, -1.325, 1.236, -0.231, 0.480)

# Pairs with R_m (p + q) below this use the small-momentum series for a_l.
COULOMB_SERIES_LIMIT = 2.0
# Pairs with R_m min(p, q) below this use the one-small-momentum expansion.
ONE_SMALL_LIMIT = 3.0
# b_l switches to its Taylor series once (p^2 + 2pq) / (a^2 + q^2) <= this,
# with p <= q and a the slowest short-range decay rate.
SHORT_SERIES_RATIO = 0.5


@dataclass(frozen=True)
class PotentialModel:
    """``-Z/r + V_short(r)`` truncated at ``r_cutoff``.

    ``V_short = -(a1 exp(-a2 r) + a3 r exp(-a4 r) + a5 exp(-a6 r)) / r``.
    """

    Z: float = 1.0
    short_range: tuple = (0.0, 0.0, 0.0, 1.0, 0.0, 1.0)
    r_cutoff: float = 225.0

    def __post_init__(self):
        if not self.Z > 0:
            raise InvalidArgument(f"nuclear charge must be positive, got {self.Z}")
        if not self.r_cutoff > 0:
            raise InvalidArgument(f"r_cutoff must be positive, got {self.r_cutoff}")
        sr = tuple(float(v) for v in self.short_range)
        if len(sr) != 6:
            raise InvalidArgument("short_range needs six parameters a1..a6")
        a1, a2, a3, a4, a5, a6 = sr
        for amp, rate, name in ((a1, a2, "a2"), (a3, a4, "a4"), (a5, a6, "a6")):
            if amp != 0.0 and not rate > 0:
                raise InvalidArgument(f"decay rate {name} must be positive")
        object.__setattr__(self, "short_range", sr)

    @classmethod
    def hydrogen(cls, r_cutoff=225.0):
        return cls(1.0, (0.0, 0.0, 0.0, 1.0, 0.0, 1.0), r_cutoff)

    @classmethod
    def helium_sae(cls, r_cutoff=225.0):
        return cls(1.0, HELIUM_SAE, r_cutoff)

    @property
    def has_short_range(self):
        a = self.short_range
        return a[0] != 0.0 or a[2] != 0.0 or a[4] != 0.0

    @property
    def is_hydrogenic(self):
        return not self.has_short_range

    def descriptor(self):
        return {"Z": float(self.Z), "short_range": list(self.short_range),
                "r_cutoff": float(self.r_cutoff)}


@dataclass(frozen=True)
class KernelRule:
    """Composite Gauss-Legendre rule in Q.

    Panel count per (p, q) pair is the largest of: the oscillation estimate
    ``R_m * span * points_per_period / (2 pi * order)``, the short-range
    resolution ``span / short_range_panel``, and ``ceil((l + 1) / 4)`` for the
    degree-2l polynomial P_l(xi(Q)).
    """

    order: int = 16
    points_per_period: float = 8.0
    short_range_panel: float = 0.5
    min_panels: int = 1

    def __post_init__(self):
        if self.order < 1 or self.points_per_period <= 0 or self.min_panels < 1:
            raise InvalidArgument("invalid kernel rule")

    @property
    def base(self):
        return gauss_legendre(self.order)

    def refined(self, factor):
        """Rule with ``factor`` times the node density."""
        return KernelRule(self.order, self.points_per_period * factor,
                          self.short_range_panel / factor, self.min_panels * factor)

    def descriptor(self):
        return asdict(self)


@dataclass(frozen=True, eq=False)
class KernelBlock:
    l: int
    matrix: np.ndarray
    grid: object = field(repr=False)


# ---------------------------------------------------------------- pointwise pieces

def w_short(Q_squared, model):
    a1, a2, a3, a4, a5, a6 = model.short_range
    Q2 = np.asarray(Q_squared, dtype=float)
    val = a1 / (a2 * a2 + Q2) + 2.0 * a3 * a4 / (a4 * a4 + Q2) ** 2 + a5 / (a6 * a6 + Q2)
    return -val / (2.0 * np.pi**2)


def w_coulomb(Q, model):
    """Transform of the truncated Coulomb term, ``Z (cos Q R - 1) / (2 pi^2 Q^2)``."""
    Q = np.asarray(Q, dtype=float)
    R = model.r_cutoff
    half = 0.5 * Q * R
    with np.errstate(invalid="ignore", divide="ignore"):
        val = -2.0 * np.sin(half) ** 2 / (Q * Q)
    val = np.where(Q == 0.0, -0.5 * R * R, val)
    return model.Z * val / (2.0 * np.pi**2)


def coulomb_integrand(p, q, xi, l, model):
    """Integrand of a_l in the xi variable; the p = q, xi -> 1 limit is analytic."""
    from .specfun import legendre_P_all

    z = (p * p + q * q) / (2.0 * p * q)
    Pl = legendre_P_all(l, xi)[l]
    u = 2.0 * p * q * (z - xi)  # = Q^2
    R = model.r_cutoff
    if u <= 0.0 or math.sqrt(u) * R < 1e-6:
        # cos(sqrt(u) R) - 1 = -u R^2 / 2 + u^2 R^4 / 24 - ...
        return model.Z * R * R / (8.0 * np.pi**2) * Pl * (-1.0 + u * R * R / 12.0)
    return model.Z / (8.0 * np.pi**2 * p * q) * Pl / (z - xi) * (-2.0 * math.sin(0.5 * math.sqrt(u) * R) ** 2)


# ---------------------------------------------------------------- small-momentum series
#
# For tiny p, q the integrand is almost a low-order polynomial in xi and the
# Legendre projection cancels to many digits. Expanding in powers of
# Q^2 = 2pq(z - xi) and integrating P_l against (1 - xi)^j exactly avoids it:
#   S_m = int P_l(xi) Q^{2m} dxi = sum_j C(m, j) (p - q)^{2(m-j)} (2pq)^j I_j,
#   I_j = int P_l(xi) (1 - xi)^j dxi = (-1)^l 2^{j+1} j!^2 / ((j-l)! (j+l+1)!).
# All terms of S_m share one sign, so nothing cancels.

@njit
def _scaled_moments(l, m_max, p, q):
    lo2 = (p - q) * (p - q)
    s2 = 2.0 * p * q
    I = np.zeros(m_max + 1)
    if l <= m_max:
        # I_l = (-1)^l 2^{l+1} l!^2 / (2l+1)! = (-1)^l 2 prod_k k / (2k+1)
        v = 2.0 if l % 2 == 0 else -2.0
        for k in range(1, l + 1):
            v *= k / (2.0 * k + 1.0)
        I[l] = v
        for j in range(l + 1, m_max + 1):
            I[j] = I[j - 1] * 2.0 * j * j / ((j - l) * (j + l + 1.0))
    S = np.zeros(m_max + 1)
    for m in range(l, m_max + 1):
        acc = 0.0
        binom = 1.0  # C(m, j), built from j = m downwards
        for j in range(m, l - 1, -1):
            acc += binom * lo2 ** (m - j) * s2 ** j * I[j]
            binom *= j / (m - j + 1.0)
        S[m] = acc
    return S


@njit
def _a_series(p, q, l, Z, R):
    m_max = l + 16
    S = _scaled_moments(l, m_max, p, q)
    total = 0.0
    c = 1.0  # R^{2k} / (2k)!
    for k in range(1, m_max + 2):
        c *= R * R / ((2.0 * k - 1.0) * 2.0 * k)
        if k - 1 >= l:
            total += (-1.0) ** k * c * S[k - 1]
    return Z / (4.0 * np.pi * np.pi) * total


# ---------------------------------------------------------------- one small momentum
#
# With p << q the Legendre projection of a function of Q^2 cancels like
# (p/q)^l. Taylor-expanding in d = p^2 - 2 p q xi about Q^2 = q^2 and using
#   M_j = int P_l(xi) xi^j dxi   (j >= l, j - l even, all of one sign)
# keeps every term of a given order positive up to a common sign.
# For the Coulomb factor h(u) = (cos(R sqrt u) - 1) / u the derivatives are
#   h^(n)(q^2) = -R^2 (-R^2 / 2)^n B_n(X) / X^(2n+2),  X = q R,
#   B_n(X) = int_0^X s^(n+1) j_n(s) ds,  B_{n+1} = (2n+2) B_n - X^(n+2) j_n(X).

@njit
def _legendre_monomials(l, n_max):
    """M[j] = int P_l(xi) xi^j dxi for j = 0..n_max."""
    M = np.zeros(n_max + 1)
    if l > n_max:
        return M
    v = 2.0  # 2^{l+1} l!^2 / (2l+1)! = 2 prod_k k / (2k+1)
    for k in range(1, l + 1):
        v *= k / (2.0 * k + 1.0)
    M[l] = v
    j = l
    while j + 2 <= n_max:
        M[j + 2] = M[j] * (j + 2.0) * (j + 1.0) * ((j + l) / 2 + 1.0) / (
            ((j - l) / 2 + 1.0) * (j + l + 3.0) * (j + l + 2.0))
        j += 2
    return M


@njit
def _coulomb_moments(n_max, X, s):
    """beta[n] = s^n B_n(X), stable in both directions."""
    n_fwd = min(n_max, int(0.5 * X) - 1)
    beta = np.zeros(n_max + 1)
    n_top = n_max
    if n_fwd < n_max:
        n_top = n_max + int(X) + 40
    jn = np.empty(n_top + 1)
    _sph_jn_scalar(n_top, X, jn)
    sX = s * X
    if n_fwd >= 0:
        beta[0] = 2.0 * math.sin(0.5 * X) ** 2
        for n in range(n_fwd):
            beta[n + 1] = (2 * n + 2) * s * beta[n] - sX ** (n + 1) * X * jn[n]
    if n_fwd < n_max:
        b = 0.0
        for n in range(n_top - 1, max(n_fwd, 0) - 1, -1):
            b = (b / s + sX ** n * X * X * jn[n]) / (2 * n + 2)
            if n <= n_max and n > n_fwd:
                beta[n] = b
            if n == 0 and n_fwd < 0:
                beta[0] = b
    return beta


@njit
def _a_one_small(p, q, l, Z, R):
    if p > q:
        p, q = q, p
    s = p / q
    n_max = l + 36
    beta = _coulomb_moments(n_max, q * R, s)
    M = _legendre_monomials(l, n_max)
    total = 0.0
    fact = 1.0
    for n in range(n_max + 1):
        if n > 0:
            fact *= n
        if n < l:
            continue
        inner = 0.0
        binom = 1.0  # C(n, j) from j = n downwards
        for j in range(n, l - 1, -1):
            if (j - l) % 2 == 0:
                inner += binom * 2.0 ** (j - n) * s ** (n - j) * M[j]
            binom *= j / (n - j + 1.0)
        sign = 1.0 if (n + l) % 2 == 0 else -1.0
        total += sign * beta[n] / fact * inner
    return -Z / (4.0 * np.pi * np.pi * q * q) * total


@njit
def _b_one_small(p, q, l, sr):
    if p > q:
        p, q = q, p
    n_max = l + 60
    M = _legendre_monomials(l, n_max)
    total = 0.0
    for c in range(3):
        amp = sr[2 * c]
        if amp == 0.0:
            continue
        rate = sr[2 * c + 1]
        t = 1.0 / (rate * rate + q * q)
        x = 2.0 * p * q * t
        y = p * p * t
        for n in range(l, n_max + 1):
            inner = 0.0
            binom = 1.0
            for j in range(n, l - 1, -1):
                if (j - l) % 2 == 0:
                    inner += binom * y ** (n - j) * x ** j * M[j]
                binom *= j / (n - j + 1.0)
            # (-1)^n from W^(n), (-1)^j = (-1)^l from (-2pq xi)^j
            sign = 1.0 if (n + l) % 2 == 0 else -1.0
            if c == 1:
                total += sign * 2.0 * amp * rate * (n + 1) * t * t * inner
            else:
                total += sign * amp * t * inner
    return -0.5 * total / (2.0 * np.pi * np.pi)


def _slowest_rate_sq(model):
    a = model.short_range
    rates = [r for amp, r in ((a[0], a[1]), (a[2], a[3]), (a[4], a[5])) if amp != 0.0]
    return min(rates) ** 2 if rates else 0.0


@njit
def _use_short_series(p, q, rate_sq):
    lo = min(p, q)
    hi = max(p, q)
    return lo * lo + 2.0 * lo * hi <= SHORT_SERIES_RATIO * (rate_sq + hi * hi)


# ---------------------------------------------------------------- pair quadrature
#
# Entries far smaller than their integrand (cancellation by 1e5 and more)
# are sensitive to any coherent shift of the Q window. |p - q| is therefore
# carried as a double-double, the window length is exactly 2 min(p, q), the
# phase R Q / 2 comes from an error-free product, and xi is measured from
# whichever end of (-1, 1) is closer.

_SPLIT = 134217729.0  # 2^27 + 1


@njit
def _window(p, q):
    """(lo, lo_err, span) with lo + lo_err = |p - q| exactly."""
    big = max(p, q)
    small = min(p, q)
    lo = big - small
    return lo, (big - lo) - small, 2.0 * small


@njit
def _node(lo, lo_err, t):
    """Q = lo + t as a rounded value plus its correction."""
    s = lo + t
    bb = s - lo
    return s, (lo - (s - bb)) + (t - bb) + lo_err


@njit
def _sin2_half(R, Q, dQ):
    """sin^2(R (Q + dQ) / 2) with the rounding of the product carried along."""
    c = 0.5 * R
    x = c * Q
    ch = _SPLIT * c
    ch = ch - (ch - c)
    cl = c - ch
    qh = _SPLIT * Q
    qh = qh - (qh - Q)
    ql = Q - qh
    err = ((ch * qh - x) + ch * ql + cl * qh) + cl * ql + c * dQ
    s = np.sin(x) + err * np.cos(x)
    return s * s


@njit
def _xi_from_offset(t, lo, lo_err, span, two_pq):
    u = span - t
    if t <= u:
        return 1.0 - t * (t + 2.0 * lo + 2.0 * lo_err) / two_pq
    return -1.0 + u * (2.0 * (lo + span) - u + 2.0 * lo_err) / two_pq


def _panel_count(p, q, l, model, rule):
    span = 2.0 * np.minimum(p, q)
    n = np.ceil(model.r_cutoff * span * rule.points_per_period / (2.0 * np.pi * rule.order))
    if model.has_short_range:
        n = np.maximum(n, np.ceil(span / rule.short_range_panel))
    n = np.maximum(n, math.ceil((l + 1) / 4))
    return np.maximum(n, rule.min_panels).astype(np.int64)


def _pair_integrals(p, q, l, model, rule, nodes, weights):
    """Vectorized (a_l, b_l) for 1-d arrays of pairs."""
    p = np.atleast_1d(np.asarray(p, dtype=float))
    q = np.atleast_1d(np.asarray(q, dtype=float))
    npan = _panel_count(p, q, l, model, rule)
    big = np.maximum(p, q)
    small = np.minimum(p, q)
    lo = big - small
    lo_err = (big - lo) - small
    width = 2.0 * small / npan
    pair = np.repeat(np.arange(p.size), npan)
    start = np.concatenate(([0], np.cumsum(npan)[:-1]))
    k = np.arange(pair.size) - np.repeat(start, npan)
    h = width[pair][:, None]
    t = k[:, None] * h + 0.5 * h * (nodes[None, :] + 1.0)
    lo_ = lo[pair][:, None]
    le = lo_err[pair][:, None]
    span = 2.0 * small[pair][:, None]
    Q, dQ = _node(lo_, le, t)
    wq = 0.5 * h * weights[None, :]
    two_pq = 2.0 * p[pair][:, None] * q[pair][:, None]
    u = span - t
    xi = np.where(t <= u, 1.0 - t * (t + 2.0 * lo_ + 2.0 * le) / two_pq,
                  -1.0 + u * (2.0 * (lo_ + span) - u + 2.0 * le) / two_pq)
    # Legendre recurrence in place
    if l == 0:
        Pl = np.ones_like(xi)
    else:
        P0 = np.ones_like(xi)
        P1 = xi.copy()
        for n in range(1, l):
            P0, P1 = P1, ((2 * n + 1) * xi * P1 - n * P0) / (n + 1)
        Pl = P1
    R = model.r_cutoff
    fa = Pl * (-2.0 * _sin2_half(R, Q, dQ)) / Q
    a_panel = np.sum(wq * fa, axis=1)
    a = np.zeros(p.size)
    np.add.at(a, pair, a_panel)
    a *= model.Z / (4.0 * np.pi**2 * p * q)
    for i in np.nonzero(R * (p + q) <= COULOMB_SERIES_LIMIT)[0]:
        a[i] = _a_series(p[i], q[i], l, float(model.Z), float(R))
    one = (R * np.minimum(p, q) <= ONE_SMALL_LIMIT) & (R * (p + q) > COULOMB_SERIES_LIMIT)
    for i in np.nonzero(one)[0]:
        a[i] = _a_one_small(p[i], q[i], l, float(model.Z), float(R))
    b = np.zeros(p.size)
    if model.has_short_range:
        fb = Pl * w_short(Q * Q, model) * Q
        b_panel = np.sum(wq * fb, axis=1)
        np.add.at(b, pair, b_panel)
        b /= 2.0 * p * q
        sr = np.asarray(model.short_range, dtype=float)
        rate_sq = _slowest_rate_sq(model)
        for i in range(p.size):
            if _use_short_series(p[i], q[i], rate_sq):
                b[i] = _b_one_small(p[i], q[i], l, sr)
    return a, b


def _check_pq(p, q):
    if not (p > 0 and q > 0):
        raise InvalidArgument("kernel momenta must be positive")


def a_l(p, q, l, model, rule=None):
    """Legendre coefficient of the truncated Coulomb kernel."""
    _check_pq(p, q)
    rule = rule or KernelRule()
    base = rule.base
    a, _ = _pair_integrals(p, q, int(l), model, rule, base.nodes, base.weights)
    return float(a[0])


def b_l(p, q, l, model, rule=None):
    """Legendre coefficient of the short-range kernel; 0 for hydrogenic models."""
    _check_pq(p, q)
    if not model.has_short_range:
        return 0.0
    rule = rule or KernelRule()
    base = rule.base
    _, b = _pair_integrals(p, q, int(l), model, rule, base.nodes, base.weights)
    return float(b[0])


# ---------------------------------------------------------------- block assembly

@njit(parallel=True)
def _block_jit(p, l, Z, R, sr, has_sr, rate_sq, order, ppp, sr_panel, min_panels, nodes,
               weights):
    N = p.size
    K = np.zeros((N, N))
    a1, a2, a3, a4, a5, a6 = sr[0], sr[1], sr[2], sr[3], sr[4], sr[5]
    lpan = (l + 1 + 3) // 4
    two_pi2 = 2.0 * np.pi * np.pi
    for i in prange(N):
        pi_ = p[i]
        for j in range(i, N):
            qj = p[j]
            lo, lo_err, span = _window(pi_, qj)
            npan = int(math.ceil(R * span * ppp / (2.0 * np.pi * order)))
            if has_sr:
                npan = max(npan, int(math.ceil(span / sr_panel)))
            npan = max(npan, lpan, min_panels)
            h = span / npan
            sa = 0.0
            sb = 0.0
            inv = 1.0 / (2.0 * pi_ * qj)
            for k in range(npan):
                for m in range(nodes.size):
                    t = k * h + 0.5 * h * (nodes[m] + 1.0)
                    Q, dQ = _node(lo, lo_err, t)
                    wq = 0.5 * h * weights[m]
                    xi = _xi_from_offset(t, lo, lo_err, span, 2.0 * pi_ * qj)
                    if l == 0:
                        Pl = 1.0
                    else:
                        P0 = 1.0
                        P1 = xi
                        for n in range(1, l):
                            P2 = ((2 * n + 1) * xi * P1 - n * P0) / (n + 1)
                            P0 = P1
                            P1 = P2
                        Pl = P1
                    sa += wq * Pl * (-2.0 * _sin2_half(R, Q, dQ)) / Q
                    if has_sr:
                        Q2 = Q * Q
                        t4 = a4 * a4 + Q2
                        ws = -(a1 / (a2 * a2 + Q2) + 2.0 * a3 * a4 / (t4 * t4)
                               + a5 / (a6 * a6 + Q2)) / two_pi2
                        sb += wq * Pl * ws * Q
            if R * (pi_ + qj) <= COULOMB_SERIES_LIMIT:
                val = _a_series(pi_, qj, l, Z, R)
            elif R * min(pi_, qj) <= ONE_SMALL_LIMIT:
                val = _a_one_small(pi_, qj, l, Z, R)
            else:
                val = Z / (4.0 * np.pi * np.pi * pi_ * qj) * sa
            if has_sr:
                if _use_short_series(pi_, qj, rate_sq):
                    val += _b_one_small(pi_, qj, l, sr)
                else:
                    val += sb * inv
            K[i, j] = val
            K[j, i] = val
    return K


def _block_numpy(p, l, model, rule, nodes, weights):
    N = p.size
    K = np.zeros((N, N))
    for i in range(N):
        q = p[i:]
        a, b = _pair_integrals(np.full(q.size, p[i]), q, l, model, rule, nodes, weights)
        K[i, i:] = a + b
        K[i:, i] = a + b
    return K


def kernel_parts(grid, l, model, rule=None):
    """Separate N x N matrices (A, B) of a_l and b_l on the grid nodes.

    Always takes the vectorized numpy route; meant for diagnostics and tests,
    where b_l must be inspected without the much larger a_l on top.
    """
    rule = rule or KernelRule()
    base = rule.base
    p = np.asarray(grid.p_nodes, dtype=float)
    iu, ju = np.triu_indices(p.size)
    a, b = _pair_integrals(p[iu], p[ju], int(l), model, rule, base.nodes, base.weights)
    A = np.zeros((p.size, p.size))
    B = np.zeros_like(A)
    A[iu, ju] = a
    A[ju, iu] = a
    B[iu, ju] = b
    B[ju, iu] = b
    return A, B


def build_kernel_block(grid, l, model, rule=None):
    """N x N matrix of a_l(p_i, p_j) + b_l(p_i, p_j); upper triangle mirrored."""
    rule = rule or KernelRule()
    l = int(l)
    if l < 0:
        raise InvalidArgument("l must be non-negative")
    base = rule.base
    p = np.ascontiguousarray(grid.p_nodes, dtype=float)
    if _accel.USE_JIT:
        K = _block_jit(p, l, float(model.Z), float(model.r_cutoff),
                       np.asarray(model.short_range, dtype=float), model.has_short_range,
                       _slowest_rate_sq(model), rule.order, float(rule.points_per_period),
                       float(rule.short_range_panel), int(rule.min_panels), base.nodes,
                       base.weights)
    else:
        K = _block_numpy(p, l, model, rule, base.nodes, base.weights)
    if not np.all(np.isfinite(K)):
        raise InvalidArgument("non-finite kernel entry")
    return KernelBlock(l=l, matrix=K, grid=grid)
