"""Concentration radii for empirical measures and exact small-scale W1 oracles."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import cdist

from .errors import OutOfRange, SizeMismatch, TooLarge

MATCHING_MAX_N = 64


@dataclass(frozen=True)
class RadiusParams:
    N: float
    n: int
    beta: float
    rho: float

    def __post_init__(self):
        if self.N < 1 or self.n < 1 or not 0 < self.beta < 1 or self.rho < 0:
            raise OutOfRange(f"invalid radius parameters {self}")


def dimension_constant(n: int) -> tuple[float, str | None]:
    """``C*`` for dimension ``n`` and a warning when a low-dimension fallback applies.

    The closed form is negative at n=1 (clamped to 0) and singular at n=2
    (the singular factor is replaced by its n=3 value).
    """
    if n == 1:
        return 0.0, None
    if n == 2:
        factor = 1.0 / (1.0 - 2.0 ** (-0.5))
        return math.sqrt(2.0) * (factor + 2.0), "n=2: concentration constant uses the n=3 fallback factor"
    factor = 1.0 / (1.0 - 2.0 ** (1.0 - n / 2.0))
    return math.sqrt(n) * 2.0 ** ((n - 2) / 2.0) * (factor + 2.0), None


def w1_radius(N: float, n: int, beta: float, rho: float) -> float:
    """Radius ``eps`` with ``P(W1(true, empirical) >= eps) <= beta``."""
    RadiusParams(N, n, beta, rho)
    c_star, _ = dimension_constant(n)
    return rho * (c_star * N ** (-1.0 / n) + math.sqrt(n) * math.sqrt(2.0 * math.log(1.0 / beta)) * N ** -0.5)


def radius_warnings(n: int) -> list[str]:
    w = dimension_constant(n)[1]
    return [w] if w else []


def _values_1d(a) -> np.ndarray:
    pts = getattr(a, "points", a)
    arr = np.asarray(pts, dtype=float)
    if arr.ndim == 2:
        if arr.shape[1] != 1:
            raise OutOfRange("expected one-dimensional samples")
        arr = arr[:, 0]
    return arr


def w1_exact_1d(a, b) -> float:
    """Exact W1 between two 1-D empirical distributions (uniform weights)."""
    x, y = np.sort(_values_1d(a)), np.sort(_values_1d(b))
    if x.size == y.size:
        return float(np.abs(x - y).mean())
    # integral of |F_x - F_y| over the merged support
    grid = np.sort(np.concatenate([x, y]))
    Fx = np.searchsorted(x, grid[:-1], side="right") / x.size
    Fy = np.searchsorted(y, grid[:-1], side="right") / y.size
    return float(np.sum(np.abs(Fx - Fy) * np.diff(grid)))


def w1_exact_matching(a, b) -> float:
    """Exact W1 between equal-size empirical distributions via min-cost perfect matching."""
    x = np.asarray(getattr(a, "points", a), dtype=float)
    y = np.asarray(getattr(b, "points", b), dtype=float)
    x = x[:, None] if x.ndim == 1 else x
    y = y[:, None] if y.ndim == 1 else y
    if x.shape != y.shape:
        raise SizeMismatch(f"matching oracle needs equal shapes, got {x.shape} and {y.shape}")
    if x.shape[0] > MATCHING_MAX_N:
        raise TooLarge(f"matching oracle is limited to N <= {MATCHING_MAX_N}")
    cost = cdist(x, y)
    rows, cols = linear_sum_assignment(cost)
    return float(cost[rows, cols].mean())

