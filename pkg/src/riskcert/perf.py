"""Performance functions ``h: R^n -> R`` with structure flags and Lipschitz constants.

All Lipschitz constants are with respect to the Euclidean norm. Every shipped
variant is a maximum of affine pieces; :class:`Negated` turns a convex one into
a concave minimum of affine pieces.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DimensionMismatch, NotConcave, NotRepresentable, OutOfRange


class PerfFn:
    dim: int | None
    convex: bool
    concave: bool

    def __call__(self, y) -> np.ndarray | float:
        y = np.asarray(y, dtype=float)
        single = y.ndim <= 1
        pts = np.atleast_1d(y)[None, :] if single else y
        if self.dim is not None and pts.shape[1] != self.dim:
            raise DimensionMismatch(f"{type(self).__name__} takes dim {self.dim}, got {pts.shape[1]}")
        vals = self._eval(pts)
        return float(vals[0]) if single else vals

    def _eval(self, pts: np.ndarray) -> np.ndarray:
        A, b = self.pieces()
        return (pts @ A.T + b).max(axis=1)

    def pieces(self) -> tuple[np.ndarray, np.ndarray]:
        """``(A, b)`` with ``h(y) = max_i A[i] @ y + b[i]``."""
        raise NotRepresentable(f"{type(self).__name__} is not a maximum of affine pieces")

    def lipschitz(self) -> float:
        A, _ = self.pieces()
        return float(np.linalg.norm(A, axis=1).max())

    def h_max(self, radius: float) -> float:
        """Bound on ``|h|`` over the Euclidean ball of the given radius about the origin."""
        A, b = self.pieces()
        return float((np.linalg.norm(A, axis=1) * radius + np.abs(b)).max())

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class Affine(PerfFn):
    a: np.ndarray
    b: float = 0.0
    convex = True
    concave = True

    def __post_init__(self):
        a = np.array(np.ravel(self.a), dtype=float)
        a.setflags(write=False)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", float(self.b))

    @property
    def dim(self):
        return self.a.size

    def pieces(self):
        return self.a[None, :], np.array([self.b])

    def to_dict(self):
        return {"kind": "affine", "a": self.a.tolist(), "b": self.b}


@dataclass(frozen=True)
class PiecewiseMaxAffine(PerfFn):
    A: np.ndarray
    b: np.ndarray
    convex = True
    concave = False

    def __post_init__(self):
        A = np.array(self.A, dtype=float)
        if A.ndim == 1:
            A = A[:, None]
        b = np.array(np.ravel(self.b), dtype=float)
        if A.shape[0] < 1 or b.shape != (A.shape[0],):
            raise OutOfRange("need at least one piece and one offset per piece")
        A.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)

    @property
    def dim(self):
        return self.A.shape[1]

    def pieces(self):
        return self.A, self.b

    def to_dict(self):
        return {"kind": "piecewise_max_affine", "A": self.A.tolist(), "b": self.b.tolist()}


@dataclass(frozen=True)
class OneMinusY(PerfFn):
    dim = 1
    convex = True
    concave = True

    def pieces(self):
        return np.array([[-1.0]]), np.array([1.0])

    def lipschitz(self):
        return 1.0

    def to_dict(self):
        return {"kind": "one_minus_y"}


@dataclass(frozen=True)
class AbsDeviation(PerfFn):
    target: float = 0.0
    dim = 1
    convex = True
    concave = False

    def pieces(self):
        return np.array([[1.0], [-1.0]]), np.array([-self.target, self.target])

    def lipschitz(self):
        return 1.0

    def to_dict(self):
        return {"kind": "abs_deviation", "target": self.target}


@dataclass(frozen=True)
class Margin(PerfFn):
    """``max_{i != c} y_i - y_c``: positive iff class ``c`` is not the arg-max."""

    true_class: int
    classes: int
    convex = True
    concave = False

    def __post_init__(self):
        if self.classes < 2 or not 0 <= self.true_class < self.classes:
            raise OutOfRange("need classes >= 2 and 0 <= true_class < classes")

    @property
    def dim(self):
        return self.classes

    def _eval(self, pts):
        others = np.delete(pts, self.true_class, axis=1)
        return others.max(axis=1) - pts[:, self.true_class]

    def pieces(self):
        c = self.true_class
        rows = []
        for i in range(self.classes):
            if i != c:
                r = np.zeros(self.classes)
                r[i], r[c] = 1.0, -1.0
                rows.append(r)
        return np.array(rows), np.zeros(self.classes - 1)

    def lipschitz(self):
        return float(np.sqrt(2.0))

    def to_dict(self):
        return {"kind": "margin", "true_class": self.true_class, "classes": self.classes}


@dataclass(frozen=True)
class Negated(PerfFn):
    inner: PerfFn

    @property
    def dim(self):
        return self.inner.dim

    @property
    def convex(self):
        return self.inner.concave

    @property
    def concave(self):
        return self.inner.convex

    def _eval(self, pts):
        return -self.inner._eval(pts)

    def pieces(self):
        if self.inner.convex and self.inner.concave:
            A, b = self.inner.pieces()
            return -A, -b
        raise NotRepresentable("negation of a non-affine max is a minimum of affine pieces")

    def lipschitz(self):
        return self.inner.lipschitz()

    def h_max(self, radius):
        return self.inner.h_max(radius)

    def to_dict(self):
        return {"kind": "negated", "inner": self.inner.to_dict()}


def eval_h(h: PerfFn, y) -> float:
    return h(y)


def lipschitz_const(h: PerfFn) -> float:
    return h.lipschitz()


def as_piecewise(h: PerfFn) -> PiecewiseMaxAffine:
    A, b = h.pieces()
    return PiecewiseMaxAffine(A, b)


def negate(h: PerfFn) -> PerfFn:
    return h.inner if isinstance(h, Negated) else Negated(h)


def concave_pieces(g: PerfFn) -> tuple[np.ndarray, np.ndarray]:
    """``(C, d)`` with ``g(y) = min_i C[i] @ y + d[i]`` for a concave ``g``."""
    if not g.concave:
        raise NotConcave(f"{type(g).__name__} is not concave")
    if g.convex:
        A, b = g.pieces()
        return A, b
    A, b = negate(g).pieces()
    return -A, -b


def perf_from_dict(d: dict) -> PerfFn:
    try:
        kind = d["kind"]
        if kind == "affine":
            return Affine(d["a"], d.get("b", 0.0))
        if kind == "piecewise_max_affine":
            return PiecewiseMaxAffine(d["A"], d["b"])
        if kind == "one_minus_y":
            return OneMinusY()
        if kind == "abs_deviation":
            return AbsDeviation(float(d["target"]))
        if kind == "margin":
            return Margin(int(d["true_class"]), int(d["classes"]))
        if kind == "negated":
            return Negated(perf_from_dict(d["inner"]))
    except KeyError as exc:
        raise ConfigError(f"performance function missing field {exc}") from exc
    except OutOfRange as exc:
        raise ConfigError(str(exc)) from exc
    raise ConfigError(f"unknown performance function kind {d.get('kind')!r}")
