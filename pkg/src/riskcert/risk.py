"""Empirical VaR/CVaR, certified CVaR intervals and sample-size planning."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import OutOfRange
from .wasserstein import dimension_constant, radius_warnings, w1_radius

MAX_PLAN_N = 10**15


@dataclass(frozen=True)
class RiskSpec:
    """``alpha`` risk level, ``beta`` failure probability, ``H`` target half-width.

    ``L0`` is the Lipschitz constant of the map whose law is certified and
    ``rho``/``n`` the diameter and dimension of the space the radius lives in.
    """

    alpha: float
    beta: float
    H: float
    L0: float = 1.0
    rho: float = 1.0
    n: int = 1

    def __post_init__(self):
        if not 0 < self.alpha <= 1:
            raise OutOfRange("alpha must lie in (0, 1]")
        if not 0 < self.beta < 1:
            raise OutOfRange("beta must lie in (0, 1)")
        if not self.H > 0:
            raise OutOfRange("H must be positive")
        if self.L0 < 0 or self.rho < 0 or self.n < 1:
            raise OutOfRange("L0 and rho must be nonnegative, n positive")


@dataclass
class Certificate:
    kind: str
    values: dict
    confidence: float
    radii: dict = field(default_factory=dict)
    N: int = 0
    seed: int | None = None
    params: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)

    def __post_init__(self):
        if not 0 < self.confidence < 1:
            raise OutOfRange(f"confidence {self.confidence} outside (0, 1)")
        if any(r < 0 for r in self.radii.values()):
            raise OutOfRange("radii must be nonnegative")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "Certificate":
        return cls(**d)


def _check(samples, alpha) -> np.ndarray:
    x = np.asarray(samples, dtype=float).ravel()
    if x.size < 1:
        raise OutOfRange("need at least one sample")
    if not 0 < alpha <= 1:
        raise OutOfRange("alpha must lie in (0, 1]")
    return x


def var_alpha(samples, alpha: float) -> float:
    """Smallest sample ``v`` with empirical CDF ``F(v) >= 1 - alpha``."""
    x = np.sort(_check(samples, alpha))
    N = x.size
    # F(x_(j)) >= j/N for the j-th order statistic (1-based)
    j = max(1, math.ceil(N * (1.0 - alpha) - 1e-12))
    return float(x[j - 1])


def cvar_alpha(samples, alpha: float) -> float:
    """Rockafellar-Uryasev value ``min_t t + mean((x - t)^+) / alpha``.

    The objective is convex piecewise linear with kinks at the samples, so
    scanning ``t`` over the sorted samples finds the exact minimum.
    """
    x = np.sort(_check(samples, alpha))
    N = x.size
    # tail[j] = sum_{i >= j} x_(i)
    tail = np.concatenate([np.cumsum(x[::-1])[::-1], [0.0]])
    above = tail[1:] - x * (N - 1 - np.arange(N))  # sum over i > j of (x_i - x_j)
    obj = x + above / (alpha * N)
    return float(obj.min())


def cvar_certified_interval(samples, spec: RiskSpec, seed: int | None = None) -> Certificate:
    x = np.asarray(samples, dtype=float).ravel()
    emp = cvar_alpha(x, spec.alpha)
    eps2 = w1_radius(x.size, spec.n, spec.beta, spec.rho)
    half = spec.L0 / spec.alpha * eps2
    return Certificate(
        kind="cvar_interval",
        values={"cvar": emp, "var": var_alpha(x, spec.alpha), "lower": emp - half, "upper": emp + half, "half_width": half},
        confidence=1.0 - spec.beta,
        radii={"eps2": eps2},
        N=int(x.size),
        seed=seed,
        params=asdict(spec),
        warnings=radius_warnings(spec.n),
    )


def _half_width(spec: RiskSpec, N: float) -> float:
    return spec.L0 / spec.alpha * w1_radius(N, spec.n, spec.beta, spec.rho)


def plan_cvar_samples(spec: RiskSpec) -> int:
    """Smallest N whose certified half-width is at most ``H`` (bisection on the monotone radius)."""
    if _half_width(spec, 1) <= spec.H:
        return 1
    hi = 2
    while _half_width(spec, hi) > spec.H:
        hi *= 2
        if hi > MAX_PLAN_N:
            raise OutOfRange("required sample size exceeds the planning limit")
    lo = hi // 2  # lo fails, hi passes
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if _half_width(spec, mid) <= spec.H:
            hi = mid
        else:
            lo = mid
    return hi


def plan_cvar_samples_closed_form(spec: RiskSpec) -> float:
    """``((L0 rho (C* + sqrt(n) sqrt(2 ln 1/beta))) / (alpha H))^n``; meaningful for n >= 3."""
    c_star, _ = dimension_constant(spec.n)
    inner = spec.L0 * spec.rho * (c_star + math.sqrt(spec.n) * math.sqrt(2 * math.log(1 / spec.beta)))
    return (inner / (spec.alpha * spec.H)) ** spec.n


def calibrate_scale(target_N: int, alpha: float, beta: float, H: float, n: int = 1) -> float:
    """Product ``L0 * rho`` for which :func:`plan_cvar_samples` returns ``target_N``.

    Aims half a sample below the target so the ceiling lands on it.
    """
    if target_N < 2:
        raise OutOfRange("calibration target must be at least 2")
    return alpha * H / w1_radius(target_N - 0.5, n, beta, 1.0)


def gamma_robustness(H: float) -> float:
    if not H > 0:
        raise OutOfRange("H must be positive")
    return 2.0 * H
