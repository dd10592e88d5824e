import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import wasserstein_distance

from riskcert.errors import OutOfRange, SizeMismatch, TooLarge
from riskcert.wasserstein import dimension_constant, radius_warnings, w1_exact_1d, w1_exact_matching, w1_radius

arrays = st.lists(st.floats(-100, 100, allow_nan=False), min_size=1, max_size=8)


def test_radius_three_dims():
    c, warn = dimension_constant(3)
    assert c == pytest.approx(13.262, abs=1e-3)
    assert warn is None
    assert w1_radius(1e4, 3, 0.05, 1.0) == pytest.approx(0.658, abs=1e-3)


def test_radius_degenerate_and_scaling():
    assert w1_radius(100, 2, 0.1, 0.0) == 0.0
    r1 = w1_radius(1e6, 1, 0.05, 1.0)
    assert w1_radius(4e6, 1, 0.05, 1.0) == pytest.approx(r1 / 2, rel=1e-12)
    assert w1_radius(500, 4, 0.05, 3.0) == pytest.approx(3 * w1_radius(500, 4, 0.05, 1.0))


def test_low_dimension_fallbacks():
    assert dimension_constant(1)[0] == 0.0
    c2, warn = dimension_constant(2)
    assert warn and c2 > 0
    assert radius_warnings(2) and not radius_warnings(5)
    with pytest.raises(OutOfRange):
        w1_radius(0.5, 1, 0.05, 1.0)
    with pytest.raises(OutOfRange):
        w1_radius(10, 1, 1.0, 1.0)


def test_radius_monotone_in_N():
    for n in (1, 2, 3, 6):
        r = [w1_radius(N, n, 0.05, 1.0) for N in (10, 100, 1000, 10_000)]
        assert all(a > b for a, b in zip(r, r[1:]))


def test_1d_examples():
    assert w1_exact_1d([1.0, 2.0], [2.0, 1.0]) == 0.0
    assert w1_exact_1d([0.0], [1.0]) == 1.0
    assert w1_exact_1d([0.0, 2.0], [1.0, 3.0]) == pytest.approx(1.0)
    assert w1_exact_matching([0.0, 2.0], [1.0, 3.0]) == pytest.approx(1.0)


def test_matching_examples():
    a = np.random.default_rng(0).normal(size=(6, 3))
    assert w1_exact_matching(a, a) == 0.0
    assert w1_exact_matching([[0.0, 0.0]], [[3.0, 4.0]]) == pytest.approx(5.0)
    with pytest.raises(SizeMismatch):
        w1_exact_matching(np.zeros((3, 2)), np.zeros((4, 2)))
    with pytest.raises(TooLarge):
        w1_exact_matching(np.zeros((65, 1)), np.zeros((65, 1)))


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 16).flatmap(lambda n: st.tuples(*[st.lists(st.floats(-50, 50), min_size=n, max_size=n)] * 2)))
def test_1d_matches_matching(pair):
    a, b = pair
    assert w1_exact_1d(a, b) == pytest.approx(w1_exact_matching(a, b), abs=1e-9)


@settings(max_examples=100, deadline=None)
@given(a=arrays, b=arrays)
def test_1d_matches_scipy(a, b):
    # unequal sizes go through the CDF integral
    assert w1_exact_1d(a, b) == pytest.approx(wasserstein_distance(a, b), abs=1e-9)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**31), n=st.integers(1, 8), dim=st.integers(1, 3))
def test_metric_axioms(seed, n, dim):
    rng = np.random.default_rng(seed)
    a, b, c = rng.normal(size=(3, n, dim))
    ab, ba = w1_exact_matching(a, b), w1_exact_matching(b, a)
    assert ab >= 0
    assert ab == pytest.approx(ba, abs=1e-12)
    assert w1_exact_matching(a, a) == 0.0
    assert ab <= w1_exact_matching(a, c) + w1_exact_matching(c, b) + 1e-9


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**31), shift=st.floats(-10, 10), s=st.floats(0.01, 10))
def test_translation_and_scaling(seed, shift, s):
    rng = np.random.default_rng(seed)
    a, b = rng.normal(size=(2, 6, 2))
    base = w1_exact_matching(a, b)
    assert w1_exact_matching(a + shift, b + shift) == pytest.approx(base, abs=1e-9)
    assert w1_exact_matching(s * a, s * b) == pytest.approx(s * base, rel=1e-9, abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**31))
def test_lipschitz_integral_gap(seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=int(rng.integers(1, 20)))
    b = rng.normal(loc=1.0, size=int(rng.integers(1, 20)))
    slope = rng.uniform(-3, 3)
    h = lambda x: slope * np.abs(x - 0.3)  # Lipschitz constant |slope|
    assert abs(h(a).mean() - h(b).mean()) <= abs(slope) * w1_exact_1d(a, b) + 1e-9


def test_concentration_radius_covers_empirical():
    beta, N, trials = 0.1, 200, 200
    rng = np.random.default_rng(7)
    ref = rng.uniform(size=200_000)
    r = w1_radius(N, 1, beta, 1.0)
    covered = sum(w1_exact_1d(rng.uniform(size=N), ref) <= r for _ in range(trials))
    slack = 3 * math.sqrt(beta * (1 - beta) / trials)
    assert covered / trials >= 1 - beta - slack
