import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from riskcert.errors import ConfigError, DimensionMismatch, NotConcave, NotRepresentable
from riskcert.perf import (
    AbsDeviation,
    Affine,
    Margin,
    Negated,
    OneMinusY,
    PiecewiseMaxAffine,
    as_piecewise,
    concave_pieces,
    eval_h,
    lipschitz_const,
    negate,
    perf_from_dict,
)

SHIPPED = [
    Affine([0.5, -2.0], 0.3),
    PiecewiseMaxAffine([[1.0, 0.0], [-1.0, 1.0], [0.0, -2.0]], [0.0, 1.0, 0.5]),
    OneMinusY(),
    AbsDeviation(2.0),
    Margin(1, 4),
    Negated(Affine([1.0, 1.0], -1.0)),
    Negated(PiecewiseMaxAffine([[1.0], [-1.0]], [0.0, 0.0])),
]


def _dim(h):
    return h.dim if h.dim is not None else 2


def test_eval_examples():
    assert eval_h(OneMinusY(), 0.2) == pytest.approx(0.8)
    assert eval_h(Margin(0, 3), [0.9, 0.05, 0.05]) == pytest.approx(-0.85)
    assert eval_h(PiecewiseMaxAffine([[1.0], [-1.0]], [0.0, 1.0]), 0.3) == pytest.approx(0.7)


def test_eval_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        eval_h(Margin(0, 3), [0.5, 0.5])


def test_lipschitz_examples():
    assert lipschitz_const(Affine([3.0, 4.0])) == pytest.approx(5.0)
    assert lipschitz_const(Margin(3, 10)) == pytest.approx(np.sqrt(2.0))
    assert lipschitz_const(OneMinusY()) == 1.0


def test_piece_examples():
    A, b = OneMinusY().pieces()
    np.testing.assert_array_equal(A, [[-1.0]])
    np.testing.assert_array_equal(b, [1.0])
    A, b = AbsDeviation(2.0).pieces()
    assert {(tuple(r), c) for r, c in zip(A, b)} == {((1.0,), -2.0), ((-1.0,), 2.0)}
    A, b = Margin(0, 3).pieces()
    assert {(tuple(r), c) for r, c in zip(A, b)} == {((-1.0, 1.0, 0.0), 0.0), ((-1.0, 0.0, 1.0), 0.0)}


def test_negated_nonaffine_not_representable():
    with pytest.raises(NotRepresentable):
        Negated(AbsDeviation(0.0)).pieces()


def test_concave_pieces():
    C, d = concave_pieces(Negated(AbsDeviation(1.0)))
    y = np.linspace(-3, 3, 13)[:, None]
    np.testing.assert_allclose((y @ C.T + d).min(axis=1), -np.abs(y[:, 0] - 1.0))
    with pytest.raises(NotConcave):
        concave_pieces(AbsDeviation(1.0))


@pytest.mark.parametrize("h", SHIPPED, ids=lambda h: type(h).__name__)
def test_piecewise_representation_exact(h):
    rng = np.random.default_rng(0)
    y = rng.normal(size=(200, _dim(h)))
    try:
        p = as_piecewise(h)
    except NotRepresentable:
        # concave non-affine negations are exact as a min of pieces instead
        C, d = concave_pieces(h)
        np.testing.assert_allclose((y @ C.T + d).min(axis=1), h(y), atol=1e-12)
        return
    np.testing.assert_allclose(p(y), h(y), atol=1e-12)


@pytest.mark.parametrize("h", SHIPPED, ids=lambda h: type(h).__name__)
def test_lipschitz_validity(h):
    rng = np.random.default_rng(1)
    y1 = rng.normal(size=(500, _dim(h)))
    y2 = y1 + rng.normal(scale=rng.uniform(0.01, 3, (500, 1)), size=y1.shape)
    lhs = np.abs(h(y1) - h(y2))
    rhs = lipschitz_const(h) * np.linalg.norm(y1 - y2, axis=1)
    assert (lhs <= rhs + 1e-9).all()


@pytest.mark.parametrize("h", SHIPPED, ids=lambda h: type(h).__name__)
@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**31), lam=st.floats(0.0, 1.0))
def test_curvature_flags(h, seed, lam):
    rng = np.random.default_rng(seed)
    y1, y2 = rng.normal(scale=2.0, size=(2, _dim(h)))
    mid = h(lam * y1 + (1 - lam) * y2)
    chord = lam * h(y1) + (1 - lam) * h(y2)
    if h.convex:
        assert mid <= chord + 1e-9
    if h.concave:
        assert mid >= chord - 1e-9


def test_negate_swaps_flags():
    h = AbsDeviation(0.0)
    g = negate(h)
    assert g.concave and not g.convex
    assert eval_h(g, 2.0) == -2.0


def test_h_max_bounds_values():
    rng = np.random.default_rng(2)
    for h in SHIPPED:
        y = rng.normal(size=(300, _dim(h)))
        R = np.linalg.norm(y, axis=1).max()
        assert np.abs(h(y)).max() <= h.h_max(R) + 1e-12


def test_from_dict_roundtrip():
    for h in SHIPPED:
        back = perf_from_dict(h.to_dict())
        y = np.random.default_rng(3).normal(size=(20, _dim(h)))
        np.testing.assert_array_equal(back(y), h(y))
    with pytest.raises(ConfigError):
        perf_from_dict({"kind": "huber"})
