"""Special functions: Legendre, spherical Bessel, zero-projection 3j symbols,
Gauss-Legendre rules and analytic hydrogen momentum wave functions."""
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from . import _accel
from ._accel import njit
from .errors import InvalidArgument


@dataclass(frozen=True, eq=False)
class GaussLegendreRule:
    order: int
    nodes: np.ndarray
    weights: np.ndarray

    def integrate(self, f, a=-1.0, b=1.0):
        half = 0.5 * (b - a)
        return half * np.sum(self.weights * f(a + half * (self.nodes + 1.0)))


def legendre_P_all(l_max, x):
    """P_0(x) .. P_{l_max}(x) by the three-term recurrence.

    Returns an array of shape ``(l_max + 1,) + np.shape(x)``.
    """
    x = np.asarray(x, dtype=float)
    if np.any(np.abs(x) > 1.0):
        raise InvalidArgument("Legendre argument outside [-1, 1]")
    out = np.empty((l_max + 1,) + x.shape)
    out[0] = 1.0
    if l_max >= 1:
        out[1] = x
    for n in range(1, l_max):
        out[n + 1] = ((2 * n + 1) * x * out[n] - n * out[n - 1]) / (n + 1)
    return out


def gauss_legendre(order):
    """Gauss-Legendre rule on [-1, 1] by Newton iteration on P_M.

    Every node is strictly interior, so integrands with an endpoint
    singularity are never evaluated at the endpoint itself.
    """
    order = int(order)
    if order < 1:
        raise InvalidArgument(f"quadrature order must be >= 1, got {order}")
    k = np.arange(1, order + 1)
    # Tricomi initial guess, descending nodes
    x = np.cos(np.pi * (k - 0.25) / (order + 0.5)) * (
        1.0 - (order - 1.0) / (8.0 * order**3)
    )
    for _ in range(100):
        p0 = np.ones_like(x)
        p1 = x.copy()
        for n in range(1, order):
            p0, p1 = p1, ((2 * n + 1) * x * p1 - n * p0) / (n + 1)
        # p1 = P_M, p0 = P_{M-1}
        dp = order * (x * p1 - p0) / (x * x - 1.0)
        dx = p1 / dp
        x = x - dx
        if np.max(np.abs(dx)) < 1e-16:
            break
    p0 = np.ones_like(x)
    p1 = x.copy()
    for n in range(1, order):
        p0, p1 = p1, ((2 * n + 1) * x * p1 - n * p0) / (n + 1)
    dp = order * (x * p1 - p0) / (x * x - 1.0)
    w = 2.0 / ((1.0 - x * x) * dp * dp)
    nodes = x[::-1].copy()
    weights = w[::-1].copy()
    if order % 2 == 1:
        nodes[order // 2] = 0.0
    return GaussLegendreRule(order=order, nodes=nodes, weights=weights)


# ---------------------------------------------------------------- spherical Bessel

_SERIES_LIMIT = 0.5
_RESCALE = 1e200


@njit
def _sph_jn_scalar(k_max, z, out):
    """Fill out[0..k_max] with j_k(z), z >= 0."""
    if z == 0.0:
        out[0] = 1.0
        for k in range(1, k_max + 1):
            out[k] = 0.0
        return
    if z < _SERIES_LIMIT:
        h = -0.5 * z * z
        pref = 1.0
        for k in range(k_max + 1):
            if k > 0:
                pref *= z / (2 * k + 1)
            term = 1.0
            s = 1.0
            m = 1
            while True:
                term *= h / (m * (2 * k + 2 * m + 1))
                s += term
                if abs(term) < 1e-17 * abs(s):
                    break
                m += 1
            out[k] = pref * s
        return
    zmax = z if z > k_max else float(k_max)
    n_start = int(zmax) + 20 + int(math.sqrt(40.0 * zmax))
    jp1 = 0.0
    jk = 1e-300
    scale = 1.0
    for k in range(n_start, -1, -1):
        if k <= k_max:
            out[k] = jk
        if k == 0:
            break
        jm1 = (2 * k + 1) / z * jk - jp1
        jp1 = jk
        jk = jm1
        if abs(jk) > _RESCALE:
            jk /= _RESCALE
            jp1 /= _RESCALE
            for i in range(k - 1, min(k_max, n_start) + 1):
                if i <= k_max and i >= k - 1:
                    out[i] /= _RESCALE
    j0 = math.sin(z) / z
    j1 = (math.sin(z) / z - math.cos(z)) / z
    if abs(j0) >= abs(j1) or k_max == 0:
        f = j0 / out[0]
    else:
        f = j1 / out[1]
    for k in range(k_max + 1):
        out[k] *= f


@njit
def _sph_jn_array(k_max, z):
    out = np.empty((z.size, k_max + 1))
    buf = np.empty(k_max + 1)
    for i in range(z.size):
        _sph_jn_scalar(k_max, z[i], buf)
        out[i, :] = buf
    return out


def _sph_jn_numpy(k_max, z):
    """Vectorized Miller recurrence; same algorithm as the scalar kernel."""
    z = np.asarray(z, dtype=float)
    out = np.zeros((z.size, k_max + 1))
    zero = z == 0.0
    small = (z > 0.0) & (z < _SERIES_LIMIT)
    big = z >= _SERIES_LIMIT
    out[zero, 0] = 1.0
    if np.any(small):
        zs = z[small]
        h = -0.5 * zs * zs
        pref = np.ones_like(zs)
        for k in range(k_max + 1):
            if k > 0:
                pref = pref * zs / (2 * k + 1)
            term = np.ones_like(zs)
            s = np.ones_like(zs)
            for m in range(1, 60):
                term = term * h / (m * (2 * k + 2 * m + 1))
                s = s + term
                if np.all(np.abs(term) < 1e-17 * np.abs(s)):
                    break
            out[small, k] = pref * s
    if np.any(big):
        zb = z[big]
        zmax = max(float(zb.max()), float(k_max))
        n_start = int(zmax) + 20 + int(math.sqrt(40.0 * zmax))
        res = np.zeros((zb.size, k_max + 1))
        jp1 = np.zeros_like(zb)
        jk = np.full_like(zb, 1e-300)
        for k in range(n_start, -1, -1):
            if k <= k_max:
                res[:, k] = jk
            if k == 0:
                break
            jm1 = (2 * k + 1) / zb * jk - jp1
            jp1, jk = jk, jm1
            over = np.abs(jk) > _RESCALE
            if np.any(over):
                jk[over] /= _RESCALE
                jp1[over] /= _RESCALE
                res[over, k - 1:] /= _RESCALE
        j0 = np.sin(zb) / zb
        j1 = (np.sin(zb) / zb - np.cos(zb)) / zb
        if k_max == 0:
            f = j0 / res[:, 0]
        else:
            f = np.where(np.abs(j0) >= np.abs(j1), j0 / res[:, 0], j1 / res[:, 1])
        out[big] = res * f[:, None]
    return out


def spherical_bessel_j_all(k_max, z):
    """j_0(z) .. j_{k_max}(z) for real z >= 0.

    Downward (Miller) recurrence normalized to the closed forms of j_0 or
    j_1, with a power series below z = 0.5. Scalar ``z`` gives shape
    ``(k_max + 1,)``, array ``z`` gives ``z.shape + (k_max + 1,)``.
    """
    k_max = int(k_max)
    za = np.asarray(z, dtype=float)
    if np.any(za < 0):
        raise InvalidArgument("spherical Bessel argument must be non-negative")
    flat = np.ascontiguousarray(za.ravel())
    if _accel.USE_JIT:
        res = _sph_jn_array(k_max, flat)
    else:
        res = _sph_jn_numpy(k_max, flat)
    return res.reshape(za.shape + (k_max + 1,))


# ---------------------------------------------------------------- 3j symbols

def wigner3j_zero(l, l1, l2):
    """(l l1 l2; 0 0 0) from the closed form, accumulated in log-gamma."""
    l, l1, l2 = int(l), int(l1), int(l2)
    if min(l, l1, l2) < 0:
        raise InvalidArgument("angular momenta must be non-negative")
    J = l + l1 + l2
    if J % 2 or l > l1 + l2 or l1 > l + l2 or l2 > l + l1:
        return 0.0
    g = J // 2
    lg = math.lgamma
    log_val = 0.5 * (lg(J - 2 * l + 1) + lg(J - 2 * l1 + 1) + lg(J - 2 * l2 + 1) - lg(J + 2))
    log_val += lg(g + 1) - lg(g - l + 1) - lg(g - l1 + 1) - lg(g - l2 + 1)
    return (-1.0) ** g * math.exp(log_val)


def wigner3j_zero_table(l_max, k_max):
    """Array T[l, l1, l2] = (l l1 l2; 0 0 0) for l, l2 <= l_max and l1 <= k_max."""
    l = np.arange(l_max + 1)[:, None, None]
    l1 = np.arange(k_max + 1)[None, :, None]
    l2 = np.arange(l_max + 1)[None, None, :]
    J = l + l1 + l2
    ok = (J % 2 == 0) & (l <= l1 + l2) & (l1 <= l + l2) & (l2 <= l + l1)
    g = J // 2
    Jf = J.astype(float)
    with np.errstate(invalid="ignore"):
        log_val = 0.5 * (
            gammaln(np.maximum(Jf - 2 * l + 1, 1))
            + gammaln(np.maximum(Jf - 2 * l1 + 1, 1))
            + gammaln(np.maximum(Jf - 2 * l2 + 1, 1))
            - gammaln(Jf + 2)
        )
        log_val += (
            gammaln(g + 1.0)
            - gammaln(np.maximum(g - l + 1.0, 1))
            - gammaln(np.maximum(g - l1 + 1.0, 1))
            - gammaln(np.maximum(g - l2 + 1.0, 1))
        )
    sign = np.where(g % 2 == 0, 1.0, -1.0)
    return np.where(ok, sign * np.exp(log_val), 0.0)


# ---------------------------------------------------------------- hydrogen oracle

def _gegenbauer(k, lam, x):
    c0 = np.ones_like(x)
    if k == 0:
        return c0
    c1 = 2.0 * lam * x
    for n in range(2, k + 1):
        c0, c1 = c1, (2.0 * x * (n + lam - 1) * c1 - (n + 2 * lam - 2) * c0) / n
    return c1


def hydrogen_chi(n, l, p, Z=1.0):
    """Analytic momentum radial function chi_nl(p) = p F_nl(p), unit norm on (0, inf).

    Podolsky-Pauling / Gegenbauer closed form, signed positive at small p.
    """
    n, l = int(n), int(l)
    if n < 1 or l < 0 or l >= n:
        raise InvalidArgument(f"need 0 <= l < n, got n={n}, l={l}")
    p = np.asarray(p, dtype=float) / Z
    k = n - l - 1
    npp = (n * p) ** 2
    log_norm = 0.5 * (math.log(2.0 / math.pi) + math.lgamma(k + 1) - math.lgamma(n + l + 1))
    log_norm += 2 * math.log(n) + (2 * l + 2) * math.log(2.0) + math.lgamma(l + 1) + l * math.log(n)
    F = math.exp(log_norm) * p**l / (npp + 1.0) ** (l + 2)
    F = F * _gegenbauer(k, l + 1, (npp - 1.0) / (npp + 1.0)) * (-1.0) ** k
    return p * F / math.sqrt(Z)


def hydrogen_chi_exact(n, l, grid, Z=1.0):
    """``hydrogen_chi`` sampled on the grid, renormalized under its quadrature."""
    chi = hydrogen_chi(n, l, grid.p_nodes, Z)
    norm = math.sqrt(float(np.sum(grid.quad_weights * chi * chi)))
    return chi / norm
