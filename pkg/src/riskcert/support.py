"""Template-polytope over-approximation of the output set.

The fitted set is ``{z : V z <= theta}`` with ``theta_i = max_k V_i . y_k``,
the optimum of the scenario program that minimises ``sum(theta)`` subject to
containing every sample.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy.optimize import linprog
from scipy.special import gammaln, logsumexp

from .errors import BadDimension, DimensionMismatch, MalformedFile, OutOfRange, UnboundedPolytope
from .sampling import as_points

CONTAINS_TOL = 1e-9
DEDUP_TOL = 1e-9


@dataclass(frozen=True)
class Template:
    V: np.ndarray

    def __post_init__(self):
        V = np.array(self.V, dtype=float)
        if V.ndim != 2 or V.shape[0] < 1:
            raise BadDimension("template needs a 2-D array of direction rows")
        norms = np.linalg.norm(V, axis=1)
        if (norms == 0).any():
            raise BadDimension("template rows must be nonzero")
        V = V / norms[:, None]
        keep = []
        for i, row in enumerate(V):
            if all(np.linalg.norm(row - V[j]) > DEDUP_TOL for j in keep):
                keep.append(i)
        V = V[keep]
        V.setflags(write=False)
        object.__setattr__(self, "V", V)

    @property
    def L(self) -> int:
        return self.V.shape[0]

    @property
    def n(self) -> int:
        return self.V.shape[1]


def make_template(kind: str, n: int, L: int | None = None, seed: int | None = None) -> Template:
    if n < 1:
        raise BadDimension("dimension must be positive")
    if kind == "box":
        eye = np.eye(n)
        return Template(np.vstack([eye, -eye]))
    if kind in ("octagon", "circle_uniform"):
        if n != 2:
            raise BadDimension(f"{kind} templates are 2-D only")
        L = 8 if kind == "octagon" else L
        if L is None or L < 3:
            raise BadDimension("circle_uniform needs L >= 3")
        ang = 2 * np.pi * np.arange(L) / L
        V = np.column_stack([np.cos(ang), np.sin(ang)])
        V[np.abs(V) < 1e-15] = 0.0
        return Template(V)
    if kind == "random_dirs":
        if L is None or L < n + 1:
            raise BadDimension("random_dirs needs L >= n + 1")
        rng = np.random.default_rng(seed)
        return Template(rng.standard_normal((L, n)))
    raise BadDimension(f"unknown template kind {kind!r}")


def scenario_sample_size(eps1: float, beta1: float, n: int, L: int) -> int:
    """Smallest N with ``N >= (1/eps1) e/(e-1) (ln(1/beta1) + n + L)``."""
    if not (0 < eps1 < 1 and 0 < beta1 < 1):
        raise OutOfRange("eps1 and beta1 must lie in (0, 1)")
    e = math.e
    return int(math.ceil((1.0 / eps1) * (e / (e - 1.0)) * (math.log(1.0 / beta1) + n + L)))


def scenario_confidence(N: int, eps: float, d: int) -> float:
    """``sum_{i<d} C(N, i) eps^i (1-eps)^(N-i)``, accumulated in log space."""
    if not (1 <= d <= N) or not (0 < eps < 1):
        raise OutOfRange("need 1 <= d <= N and eps in (0, 1)")
    i = np.arange(d)
    log_terms = (
        gammaln(N + 1) - gammaln(i + 1) - gammaln(N - i + 1)
        + i * math.log(eps) + (N - i) * math.log1p(-eps)
    )
    return float(min(1.0, math.exp(logsumexp(log_terms))))


@dataclass(frozen=True)
class FittedSupport:
    template: Template
    theta: np.ndarray
    N_used: int
    eps1: float
    beta1: float
    sufficient: bool = True
    warnings: tuple[str, ...] = field(default=())

    def __post_init__(self):
        theta = np.array(self.theta, dtype=float)
        theta.setflags(write=False)
        object.__setattr__(self, "theta", theta)

    @property
    def V(self) -> np.ndarray:
        return self.template.V

    @property
    def n(self) -> int:
        return self.template.n

    @cached_property
    def box(self) -> tuple[np.ndarray, np.ndarray]:
        """Coordinate-wise support values ``(lo, hi)`` of the polytope."""
        n = self.n
        lo, hi = np.empty(n), np.empty(n)
        for j in range(n):
            for sign, out in ((1.0, hi), (-1.0, lo)):
                c = np.zeros(n)
                c[j] = -sign  # linprog minimises
                res = linprog(c, A_ub=self.V, b_ub=self.theta, bounds=[(None, None)] * n, method="highs")
                if res.status == 3:
                    raise UnboundedPolytope(f"template does not bound coordinate {j}")
                if res.status != 0:
                    raise UnboundedPolytope(f"support LP failed: {res.message}")
                out[j] = sign * -res.fun
        return lo, hi

    def to_dict(self) -> dict:
        return {
            "V": self.V.tolist(),
            "theta": self.theta.tolist(),
            "N_used": self.N_used,
            "eps1": self.eps1,
            "beta1": self.beta1,
            "sufficient": self.sufficient,
            "warnings": list(self.warnings),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FittedSupport":
        try:
            return cls(
                Template(d["V"]), np.array(d["theta"]), int(d["N_used"]),
                float(d["eps1"]), float(d["beta1"]), bool(d.get("sufficient", True)),
                tuple(d.get("warnings", ())),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedFile(f"support record is malformed: {exc}") from exc


def fit_support(template: Template, samples, eps1: float, beta1: float) -> FittedSupport:
    pts = as_points(samples)
    if pts.shape[1] != template.n:
        raise DimensionMismatch(f"samples have dim {pts.shape[1]}, template has dim {template.n}")
    theta = (pts @ template.V.T).max(axis=0)
    needed = scenario_sample_size(eps1, beta1, template.n, template.L)
    N = pts.shape[0]
    warnings = () if N >= needed else (f"insufficient samples: {N} < {needed} required for eps1={eps1}, beta1={beta1}",)
    return FittedSupport(template, theta, N, eps1, beta1, sufficient=N >= needed, warnings=warnings)


def contains(fs: FittedSupport, y) -> bool | np.ndarray:
    """Membership with tolerance; accepts one point or a stack of rows."""
    y = np.asarray(y, dtype=float)
    single = y.ndim <= 1
    pts = np.atleast_1d(y)[None, :] if single else y
    if pts.shape[1] != fs.n:
        raise DimensionMismatch(f"point has dim {pts.shape[1]}, support has dim {fs.n}")
    inside = (pts @ fs.V.T <= fs.theta + CONTAINS_TOL).all(axis=1)
    return bool(inside[0]) if single else inside


def violation_rate(fs: FittedSupport, holdout) -> float:
    return float(1.0 - contains(fs, as_points(holdout)).mean())


def diameter_bound(fs: FittedSupport) -> float:
    """Diagonal of the polytope's axis-aligned bounding box (an upper bound on the diameter)."""
    lo, hi = fs.box
    return float(np.linalg.norm(np.maximum(hi - lo, 0.0)))


def save_support(fs: FittedSupport, path) -> None:
    Path(path).write_text(json.dumps(fs.to_dict(), indent=1, sort_keys=True))


def load_support(path) -> FittedSupport:
    try:
        return FittedSupport.from_dict(json.loads(Path(path).read_text()))
    except json.JSONDecodeError as exc:
        raise MalformedFile(f"{path}: {exc}") from exc
