"""Distributionally robust evaluation over Wasserstein balls around the empirical law.

``dro_sup_concave`` solves

    sup_q  (1/N) sum_k g(y_k - q_k)   s.t.  (1/N) sum_k ||q_k|| <= eps,  y_k - q_k in support

for concave ``g`` by decomposition. Each sample gets a concave, nondecreasing
value function ``phi_k(t) = sup{g(xi) : ||xi - y_k|| <= t, xi in support}``
tabulated on an adaptively refined ``t`` grid; the total budget ``N eps`` is
then water-filled across the samples' upper concave hulls. A Lagrangian bound
built from the hull slopes gives the gap estimate that drives refinement.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import cvxpy as cp
import numpy as np

from .errors import CertError, InfeasibleSupport, OutOfRange, TooLarge, UnsupportedStructure
from .perf import PerfFn, concave_pieces, negate
from .risk import Certificate
from .sampling import as_points
from .support import FittedSupport, contains, diameter_bound
from .wasserstein import radius_warnings, w1_radius

SOLVER_TOL = 1e-4
INITIAL_GRID = 9
MAX_REFINE = 40
BOUNDARY_SLACK = 5e-10
BRUTE_MAX_N = 5
BRUTE_MAX_DIM = 2


class SolverFailure(CertError):
    pass


@dataclass(frozen=True)
class AmbiguityBall:
    center: np.ndarray
    eps: float
    support: FittedSupport | None = None

    def __post_init__(self):
        pts = np.array(as_points(self.center), dtype=float)
        pts.setflags(write=False)
        object.__setattr__(self, "center", pts)
        if not self.eps >= 0:
            raise OutOfRange("ball radius must be nonnegative")
        if self.support is not None:
            if self.support.n != pts.shape[1]:
                raise InfeasibleSupport("support dimension differs from the sample dimension")
            if not contains(self.support, pts).all():
                raise InfeasibleSupport("a center point lies outside the support polytope")

    @property
    def N(self) -> int:
        return self.center.shape[0]


@dataclass
class DroSolution:
    value: float
    points: np.ndarray
    budget_spent: float
    iterations: int = 0
    gap: float = 0.0
    allocation: np.ndarray = field(default=None, repr=False)


# ---------------------------------------------------------------------------
# per-sample inner problem


class _InnerSolver:
    """Evaluates ``phi(y, t)`` and a maximiser for batches of ``(y, t)`` pairs."""

    def __init__(self, C: np.ndarray, d: np.ndarray, support: FittedSupport | None):
        self.C, self.d = C, d
        self.support = support
        self.n = C.shape[1]
        if support is not None and self.n == 1:
            V, th = support.V[:, 0], support.theta
            self.lo = (-th[V < 0]).max(initial=-np.inf)
            self.hi = th[V > 0].min(initial=np.inf)
        else:
            self.lo, self.hi = -np.inf, np.inf

    def g(self, pts: np.ndarray) -> np.ndarray:
        return (pts @ self.C.T + self.d).min(axis=1)

    def solve(self, Y: np.ndarray, T: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        if self.n == 1:
            Xi = self._solve_1d(Y[:, 0], T)[:, None]
        elif self.C.shape[0] == 1 and self.support is None:
            c = self.C[0]
            nc = np.linalg.norm(c)
            Xi = Y + (T[:, None] * c / nc if nc > 0 else 0.0)
        else:
            Xi = self._contract(Y, self._solve_conic(Y, T), T)
        return self.g(Xi), Xi

    def _solve_1d(self, y, t):
        a = np.maximum(y - t, self.lo)
        b = np.minimum(y + t, self.hi)
        cands = [a, b]
        c, d = self.C[:, 0], self.d
        for i in range(len(c)):
            for j in range(i + 1, len(c)):
                if c[i] != c[j]:
                    z = (d[j] - d[i]) / (c[i] - c[j])
                    cands.append(np.clip(np.full_like(y, z), a, b))
        cands = np.stack(cands, axis=1)
        vals = (cands[..., None] * c + d).min(axis=2)
        return cands[np.arange(len(y)), vals.argmax(axis=1)]

    def _solve_conic(self, Y, T):
        M, n = Y.shape
        P = self.C.shape[0]
        Xi = cp.Variable((M, n))
        s = cp.Variable((M, 1))
        cons = [
            Xi @ self.C.T + np.tile(self.d, (M, 1)) >= s @ np.ones((1, P)),
            cp.norm(Xi - Y, 2, axis=1) <= T,
        ]
        if self.support is not None:
            cons.append(Xi @ self.support.V.T <= np.tile(self.support.theta, (M, 1)))
        prob = cp.Problem(cp.Maximize(cp.sum(s)), cons)
        try:
            prob.solve(solver=cp.CLARABEL)
        except cp.SolverError as exc:
            raise SolverFailure(f"inner conic solve failed: {exc}") from exc
        if prob.status not in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE) or Xi.value is None:
            raise SolverFailure(f"inner conic solve ended with status {prob.status}")
        return np.asarray(Xi.value)

    def _contract(self, Y, Xi, T):
        """Shrink solver output toward ``y`` until it is exactly feasible."""
        D = Xi - Y
        norms = np.linalg.norm(D, axis=1)
        lam = np.ones(len(Y))
        big = norms > T
        lam[big] = T[big] / norms[big]
        if self.support is not None:
            VD = D @ self.support.V.T
            slack = np.maximum(self.support.theta - Y @ self.support.V.T, 0.0) + BOUNDARY_SLACK
            with np.errstate(divide="ignore", invalid="ignore"):
                ratio = np.where(VD > 0, slack / VD, np.inf)
            lam = np.minimum(lam, ratio.min(axis=1))
        return Y + np.clip(lam, 0.0, 1.0)[:, None] * D


# ---------------------------------------------------------------------------
# water-filling over concave hulls


def _upper_hull(t: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Indices of the least concave majorant's vertices (``t`` ascending)."""
    hull: list[int] = []
    for i in range(len(t)):
        while len(hull) >= 2:
            a, b = hull[-2], hull[-1]
            # drop b if it lies on or below the chord a -> i
            if (v[b] - v[a]) * (t[i] - t[a]) <= (v[i] - v[a]) * (t[b] - t[a]):
                hull.pop()
            else:
                break
        hull.append(i)
    return np.array(hull)


class _Table:
    """Grid of ``(t, phi, xi)`` for one sample."""

    __slots__ = ("t", "phi", "xi", "hull")

    def __init__(self, t, phi, xi):
        self.t, self.phi, self.xi = t, phi, xi
        self.hull = _upper_hull(t, phi)

    def insert(self, t_new, phi_new, xi_new):
        t = np.concatenate([self.t, t_new])
        order = np.argsort(t, kind="stable")
        self.t = t[order]
        self.phi = np.concatenate([self.phi, phi_new])[order]
        self.xi = np.concatenate([self.xi, xi_new])[order]
        self.hull = _upper_hull(self.t, self.phi)


def _segments(tables: list[_Table], lip: float):
    """Flat arrays describing every hull segment and its upper envelope."""
    k_idx, a, b, fa, fb, s, s_prev, s_next = ([] for _ in range(8))
    for k, tab in enumerate(tables):
        h = tab.hull
        if len(h) < 2:
            continue
        ta, tb = tab.t[h[:-1]], tab.t[h[1:]]
        va, vb = tab.phi[h[:-1]], tab.phi[h[1:]]
        slope = (vb - va) / (tb - ta)
        k_idx.append(np.full(len(slope), k))
        a.append(ta), b.append(tb), fa.append(va), fb.append(vb), s.append(slope)
        s_prev.append(np.concatenate([[max(lip, slope[0])], slope[:-1]]))
        s_next.append(np.concatenate([slope[1:], [0.0]]))
    if not k_idx:
        empty = np.empty(0)
        return dict(k=np.empty(0, dtype=int), a=empty, b=empty, fa=empty, fb=empty, s=empty, sp=empty, sn=empty)
    cat = np.concatenate
    return dict(k=cat(k_idx), a=cat(a), b=cat(b), fa=cat(fa), fb=cat(fb), s=cat(s), sp=cat(s_prev), sn=cat(s_next))


def _kinks(seg):
    """Location and height of the envelope's peak inside each segment."""
    a, b, fa, fb, sp, sn = seg["a"], seg["b"], seg["fa"], seg["fb"], seg["sp"], seg["sn"]
    denom = sp - sn
    with np.errstate(divide="ignore", invalid="ignore"):
        tk = np.where(denom > 1e-15, (fb - fa + sp * a - sn * b) / denom, a)
    tk = np.clip(tk, a, b)
    psi = np.minimum(fa + sp * (tk - a), fb - sn * (b - tk))
    chord = fa + seg["s"] * (tk - a)
    return tk, psi, np.maximum(psi - chord, 0.0)


def _dual_bound(tables, seg, B, N, lam_hi):
    """``min_lambda (1/N)[lambda B + sum_k max_t (psi_k(t) - lambda t)]`` by golden section."""
    base = np.array([tab.phi[0] for tab in tables])
    tk, psi, _ = _kinks(seg)
    K = len(tables)

    def U(lam):
        best = base.copy()
        if len(seg["k"]):
            cand = np.maximum.reduce([seg["fa"] - lam * seg["a"], seg["fb"] - lam * seg["b"], psi - lam * tk])
            np.maximum.at(best, seg["k"], cand)
        return (lam * B + best.sum()) / N

    lo, hi = 0.0, max(lam_hi, 1e-12)
    gr = (math.sqrt(5) - 1) / 2
    x1, x2 = hi - gr * (hi - lo), lo + gr * (hi - lo)
    f1, f2 = U(x1), U(x2)
    for _ in range(80):
        if f1 <= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - gr * (hi - lo)
            f1 = U(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + gr * (hi - lo)
            f2 = U(x2)
    cands = [(U(0.0), 0.0), (U(lam_hi), lam_hi), (f1, x1), (f2, x2)]
    return min(cands)


def _allocate(tables, seg, B):
    """Greedy fill of the budget along hull segments in decreasing slope order."""
    K = len(tables)
    alloc = np.zeros(K)
    if len(seg["k"]) == 0:
        return alloc
    order = np.lexsort((seg["a"], seg["k"], -seg["s"]))
    remaining = B
    for j in order:
        if remaining <= 0 or seg["s"][j] <= 0:
            break
        take = min(seg["b"][j] - seg["a"][j], remaining)
        alloc[seg["k"][j]] += take
        remaining -= take
    return alloc


def _point_at(tab: _Table, t: float) -> np.ndarray:
    """Convex combination of hull maximisers, feasible for radius ``t``."""
    h = tab.hull
    th = tab.t[h]
    if t >= th[-1]:
        return tab.xi[h[-1]]
    j = int(np.searchsorted(th, t, side="right")) - 1
    j = min(max(j, 0), len(h) - 2)
    w = (t - th[j]) / (th[j + 1] - th[j])
    return (1 - w) * tab.xi[h[j]] + w * tab.xi[h[j + 1]]


def dro_sup_concave(g: PerfFn, ball: AmbiguityBall, tol: float = SOLVER_TOL) -> DroSolution:
    C, d = concave_pieces(g)
    Y = ball.center
    N, n = Y.shape
    if g.dim is not None and g.dim != n:
        raise UnsupportedStructure(f"function takes dim {g.dim}, samples have dim {n}")
    inner = _InnerSolver(C, d, ball.support)
    base = inner.g(Y)
    B = N * ball.eps
    if B == 0:
        return DroSolution(float(base.mean()), Y.copy(), 0.0, 0, 0.0, np.zeros(N))

    reach = np.full(N, B)
    if ball.support is not None:
        lo, hi = ball.support.box
        far = np.linalg.norm(np.maximum(np.abs(Y - lo), np.abs(hi - Y)), axis=1)
        reach = np.minimum(reach, far)
    lip = float(np.linalg.norm(C, axis=1).max())

    frac = np.linspace(0.0, 1.0, INITIAL_GRID)[1:]
    Tg = (reach[:, None] * frac).ravel()
    Yg = np.repeat(Y, len(frac), axis=0)
    vals, xis = inner.solve(Yg, Tg)
    vals, xis = vals.reshape(N, -1), xis.reshape(N, len(frac), n)
    tables = []
    for k in range(N):
        keep = reach[k] * frac > 0
        tables.append(
            _Table(
                np.concatenate([[0.0], reach[k] * frac[keep]]),
                np.concatenate([[base[k]], vals[k][keep]]),
                np.concatenate([Y[k][None, :], xis[k][keep]]),
            )
        )

    it = 0
    while True:
        seg = _segments(tables, lip)
        alloc = _allocate(tables, seg, B)
        pts = np.stack([_point_at(tab, alloc[k]) for k, tab in enumerate(tables)])
        value = float(inner.g(pts).mean())
        upper, lam = _dual_bound(tables, seg, B, N, lip)
        gap = max(upper - value, 0.0)
        if gap <= tol * max(1.0, abs(value)) or it >= MAX_REFINE:
            break
        it += 1
        _, _, local = _kinks(seg)
        band = (seg["sn"] <= lam * (1 + 1e-9) + 1e-12) & (seg["sp"] >= lam * (1 - 1e-9) - 1e-12)
        pick = band & (local > 1e-13) & (seg["b"] - seg["a"] > 1e-12)
        if not pick.any():
            pick = (local > 1e-13) & (seg["b"] - seg["a"] > 1e-12)
            if not pick.any():
                break
        ks = seg["k"][pick]
        mids = 0.5 * (seg["a"][pick] + seg["b"][pick])
        v_new, x_new = inner.solve(Y[ks], mids)
        for k in np.unique(ks):
            m = ks == k
            tables[k].insert(mids[m], v_new[m], x_new[m])

    spent = float(np.linalg.norm(pts - Y, axis=1).mean())
    return DroSolution(value, pts, spent, it, gap, alloc)


def dro_inf_convex(h: PerfFn, ball: AmbiguityBall, tol: float = SOLVER_TOL) -> DroSolution:
    if not h.convex:
        raise UnsupportedStructure(f"{type(h).__name__} is not convex")
    sol = dro_sup_concave(negate(h), ball, tol)
    return DroSolution(-sol.value, sol.points, sol.budget_spent, sol.iterations, sol.gap, sol.allocation)


def zeta(h_max: float, L: float, eps1: float, eps2: float, eps3: float) -> float:
    if min(h_max, L, eps1, eps2, eps3) < 0:
        raise OutOfRange("zeta arguments must be nonnegative")
    return 2.0 * h_max * eps1 + L * eps2 + L * eps3


# ---------------------------------------------------------------------------
# end-to-end certificate


def _bbox_diagonal(pts: np.ndarray) -> float:
    return float(np.linalg.norm(pts.max(axis=0) - pts.min(axis=0)))


def certify_perf_bounds(
    h: PerfFn,
    samples,
    fs: FittedSupport,
    beta2: float,
    *,
    eps1: float | None = None,
    eps2: float | None = None,
    eps3: float | None = None,
    seed: int | None = None,
    max_rule_confidence: bool = False,
) -> tuple[Certificate | None, Certificate | None]:
    """Upper bound (concave ``h``) and lower bound (convex ``h``) on the expected performance.

    Returns ``(upper, lower)``; an entry is ``None`` when ``h`` lacks the
    matching structure. Radii may be overridden for diagnostics.
    """
    if not (h.concave or h.convex):
        raise UnsupportedStructure(f"{type(h).__name__} is neither convex nor concave")
    if not 0 < beta2 < 1:
        raise OutOfRange("beta2 must lie in (0, 1)")
    pts = as_points(samples)
    N, n = pts.shape
    e1 = fs.eps1 if eps1 is None else eps1
    e2 = w1_radius(N, n, beta2, _bbox_diagonal(pts)) if eps2 is None else eps2
    e3 = w1_radius(N, n, beta2, diameter_bound(fs)) if eps3 is None else eps3
    lo, hi = fs.box
    R = float(np.linalg.norm(np.maximum(np.abs(lo), np.abs(hi))))
    L = h.lipschitz()
    hmax = h.h_max(R)
    z = zeta(hmax, L, e1, e2, e3)
    ball = AmbiguityBall(pts, e3, fs)

    confidence = 1.0 - (fs.beta1 + beta2)
    if confidence <= 0:
        raise OutOfRange("beta1 + beta2 must be below 1")
    warnings = list(fs.warnings) + radius_warnings(n)
    common = dict(
        radii={"eps1": e1, "eps2": e2, "eps3": e3},
        N=N,
        seed=seed,
        params={"beta1": fs.beta1, "beta2": beta2, "h_max": hmax, "L": L, "zeta": z, "support_radius": R},
    )
    if max_rule_confidence:
        common["params"]["confidence_max_rule"] = 1.0 - max(fs.beta1, beta2)
    mean = float(h(pts).mean())

    upper = lower = None
    if h.concave:
        sol = dro_sup_concave(h, ball)
        upper = Certificate(
            kind="perf_upper",
            values={"bound": sol.value + sol.gap + z, "dro_value": sol.value, "solver_gap": sol.gap, "empirical_mean": mean},
            confidence=confidence,
            warnings=warnings,
            **common,
        )
    if h.convex:
        sol = dro_inf_convex(h, ball)
        lower = Certificate(
            kind="perf_lower",
            values={"bound": sol.value - sol.gap - z, "dro_value": sol.value, "solver_gap": sol.gap, "empirical_mean": mean},
            confidence=confidence,
            warnings=warnings + ["lower bound subtracts zeta (triangle-inequality direction)"],
            **{**common, "params": dict(common["params"])},
        )
    return upper, lower


# ---------------------------------------------------------------------------
# brute-force oracle


def dro_brute_force(h: PerfFn, ball: AmbiguityBall, grid_step: float) -> float:
    """Best objective over lattice displacements with a discretised budget.

    Each sample may move to lattice points ``y_k + grid_step * z`` (``z``
    integer) inside the support; the cost of a move is its length rounded up
    to a quarter of ``grid_step``. A knapsack over the samples maximises the
    mean of ``h``. Every candidate is feasible, so the result is a lower bound
    on the true supremum and needs no convexity.
    """
    Y = ball.center
    N, n = Y.shape
    if N > BRUTE_MAX_N or n > BRUTE_MAX_DIM:
        raise TooLarge(f"brute force is limited to N <= {BRUTE_MAX_N}, n <= {BRUTE_MAX_DIM}")
    if not grid_step > 0:
        raise OutOfRange("grid_step must be positive")
    base = float(h(Y).mean())
    if ball.eps == 0:
        return base
    unit = grid_step / 4.0
    units = int(math.floor(N * ball.eps / unit * (1 + 1e-12)))
    if units == 0:
        return base
    budget = units * unit

    tables = []
    for y in Y:
        lo, hi = y - budget, y + budget
        if ball.support is not None:
            blo, bhi = ball.support.box
            lo, hi = np.maximum(lo, blo), np.minimum(hi, bhi)
        ranges = [
            np.arange(math.ceil((lo[j] - y[j]) / grid_step - 1e-9), math.floor((hi[j] - y[j]) / grid_step + 1e-9) + 1)
            for j in range(n)
        ]
        mesh = np.stack(np.meshgrid(*ranges, indexing="ij"), axis=-1).reshape(-1, n)
        q = mesh * grid_step
        dist = np.linalg.norm(q, axis=1)
        cost = np.ceil(dist / unit * (1 + 1e-12) - 1e-15).astype(int)
        cost[dist == 0] = 0
        xi = y + q
        ok = cost <= units
        if ball.support is not None:
            ok &= contains(ball.support, xi)
        best = np.full(units + 1, -np.inf)
        np.maximum.at(best, cost[ok], h(xi[ok]))
        tables.append(np.maximum.accumulate(best))

    total = tables[0]
    for tab in tables[1:]:
        # max-plus convolution restricted to total cost <= units
        u = np.arange(units + 1)
        diff = u[:, None] - u[None, :]
        vals = np.where(diff >= 0, total[None, :] + tab[np.clip(diff, 0, units)], -np.inf)
        total = vals.max(axis=1)
    return float(total.max() / N)
