"""Mapped Chebyshev momentum grid and its radial quadrature."""
from dataclasses import dataclass, field

import numpy as np

from .errors import InfeasibleMapping, InvalidArgument

WEIGHT_CONVENTIONS = ("chebyshev", "literal")


@dataclass(frozen=True)
class MappingParams:
    """Parameters of ``p(x) = L (1 + x + beta) / (1 - x + alpha)``."""

    L: float
    alpha: float
    beta: float = 0.0

    def __post_init__(self):
        if not self.L > 0:
            raise InvalidArgument(f"mapping scale L must be positive, got {self.L}")
        if not self.alpha > 0:
            raise InfeasibleMapping(f"mapping alpha must be positive, got {self.alpha}")
        if not self.beta >= 0:
            raise InvalidArgument(f"mapping beta must be non-negative, got {self.beta}")

    def p(self, x):
        x = np.asarray(x, dtype=float)
        return self.L * (1.0 + x + self.beta) / (1.0 - x + self.alpha)

    def dp_dx(self, x):
        x = np.asarray(x, dtype=float)
        return self.L * (2.0 + self.alpha + self.beta) / (1.0 - x + self.alpha) ** 2

    def x_of_p(self, p):
        """Inverse mapping."""
        p = np.asarray(p, dtype=float)
        return (p * (1.0 + self.alpha) - self.L * (1.0 + self.beta)) / (p + self.L)


@dataclass(frozen=True, eq=False)
class RadialGrid:
    n_points: int
    x_nodes: np.ndarray
    p_nodes: np.ndarray
    dp_dx: np.ndarray
    quad_weights: np.ndarray
    p_max: float
    mapping: MappingParams
    weight_convention: str = "chebyshev"
    chebyshev_weight: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "chebyshev_weight", np.pi / self.n_points)
        for name in ("x_nodes", "p_nodes", "dp_dx", "quad_weights"):
            arr = getattr(self, name)
            arr.setflags(write=False)

    def __len__(self):
        return self.n_points

    def descriptor(self):
        """Plain-data description, sufficient to rebuild the grid."""
        return {
            "n_points": int(self.n_points),
            "p_max": float(self.p_max),
            "L": float(self.mapping.L),
            "alpha": float(self.mapping.alpha),
            "beta": float(self.mapping.beta),
            "weight_convention": self.weight_convention,
        }

    def same_as(self, other):
        return (
            other is self
            or (
                isinstance(other, RadialGrid)
                and self.descriptor() == other.descriptor()
                and np.array_equal(self.p_nodes, other.p_nodes)
            )
        )


def chebyshev_nodes(n_points):
    """Roots of T_N in ascending order."""
    n_points = int(n_points)
    if n_points < 1:
        raise InvalidArgument(f"need at least one Chebyshev node, got {n_points}")
    # cos((2i-1) pi / 2N) written as a sine of an odd-symmetric argument, so
    # the set is exactly symmetric about 0 in floating point
    i = np.arange(n_points, 0, -1)
    return np.sin((n_points - 2 * i + 1) * np.pi / (2 * n_points))


def build_grid(n_points, p_max, L=1.0, beta=0.0, weight_convention="chebyshev"):
    """Build the mapped Chebyshev grid whose largest node sits exactly at ``p_max``.

    ``alpha`` follows from the endpoint condition ``p(x_N) = p_max``, which is
    linear in alpha. With ``weight_convention="chebyshev"`` the radial weights
    are ``(pi/N) sqrt(1 - x_j^2) p'(x_j)`` so that ``sum_j w_j f(p_j)``
    approximates ``int f dp``; ``"literal"`` drops the square-root factor.
    """
    if int(n_points) < 2:
        raise InvalidArgument(f"n_points must be >= 2, got {n_points}")
    if not p_max > 0:
        raise InvalidArgument(f"p_max must be positive, got {p_max}")
    if not L > 0:
        raise InvalidArgument(f"L must be positive, got {L}")
    if not beta >= 0:
        raise InvalidArgument(f"beta must be non-negative, got {beta}")
    if weight_convention not in WEIGHT_CONVENTIONS:
        raise InvalidArgument(f"unknown weight convention {weight_convention!r}")

    x = chebyshev_nodes(n_points)
    x_top = x[-1]
    alpha = L * (1.0 + x_top + beta) / p_max - (1.0 - x_top)
    if not alpha > 0:
        raise InfeasibleMapping(
            f"no alpha > 0 puts the last node at p_max={p_max} (L={L}, beta={beta}, N={n_points})"
        )
    mapping = MappingParams(L=float(L), alpha=float(alpha), beta=float(beta))
    p = mapping.p(x)
    p[-1] = p_max  # remove rounding in the endpoint
    dp = mapping.dp_dx(x)
    wt = np.pi / n_points
    if weight_convention == "chebyshev":
        w = wt * np.sqrt(1.0 - x * x) * dp
    else:
        w = wt * dp
    return RadialGrid(
        n_points=int(n_points),
        x_nodes=x,
        p_nodes=p,
        dp_dx=dp,
        quad_weights=w,
        p_max=float(p_max),
        mapping=mapping,
        weight_convention=weight_convention,
    )


def grid_from_descriptor(desc):
    return build_grid(desc["n_points"], desc["p_max"], desc["L"], desc["beta"],
                      desc.get("weight_convention", "chebyshev"))


def radial_integrate(grid, samples):
    """``sum_j w_j samples[j]``; ``samples`` may carry trailing batch axes."""
    samples = np.asarray(samples)
    if samples.shape[0] != grid.n_points:
        raise InvalidArgument(
            f"expected {grid.n_points} samples along axis 0, got {samples.shape[0]}"
        )
    return np.tensordot(grid.quad_weights, samples, axes=(0, 0))
