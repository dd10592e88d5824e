import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from riskcert.errors import OutOfRange
from riskcert.risk import (
    Certificate,
    RiskSpec,
    calibrate_scale,
    cvar_alpha,
    cvar_certified_interval,
    gamma_robustness,
    plan_cvar_samples,
    plan_cvar_samples_closed_form,
    var_alpha,
)
from riskcert.wasserstein import w1_exact_1d, w1_radius

samples = st.lists(st.floats(-1e3, 1e3, allow_nan=False), min_size=1, max_size=40).map(np.array)
alphas = st.floats(0.01, 1.0)


def _cvar_lp(x, alpha):
    # oracle: min over t of t + mean((x - t)^+)/alpha via a dense scan of candidate t
    ts = np.concatenate([x, [x.min() - 1.0, x.max() + 1.0]])
    return min(t + np.maximum(x - t, 0).mean() / alpha for t in ts)


def test_var_examples():
    x = np.array([1.0, 2.0, 3.0, 4.0])
    assert var_alpha(x, 0.25) == 3.0
    assert var_alpha(x, 1.0) == 1.0
    for a in (0.1, 0.5, 1.0):
        assert var_alpha(np.full(7, 2.5), a) == 2.5


def test_cvar_examples():
    x = np.array([1.0, 2.0, 3.0, 4.0])
    assert cvar_alpha(x, 1.0) == pytest.approx(2.5)
    assert cvar_alpha(x, 0.5) == pytest.approx(3.5)
    u = np.random.default_rng(0).uniform(size=100_000)
    assert cvar_alpha(u, 0.5) == pytest.approx(0.75, abs=0.01)


def test_alpha_validated():
    with pytest.raises(OutOfRange):
        cvar_alpha([1.0], 0.0)
    with pytest.raises(OutOfRange):
        var_alpha([1.0], 1.5)
    with pytest.raises(OutOfRange):
        cvar_alpha([], 0.5)


@settings(max_examples=150, deadline=None)
@given(x=samples, a=alphas)
def test_cvar_matches_scan_oracle(x, a):
    assert cvar_alpha(x, a) == pytest.approx(_cvar_lp(x, a), rel=1e-9, abs=1e-9)


@settings(max_examples=150, deadline=None)
@given(x=samples, a1=alphas, a2=alphas)
def test_cvar_monotone_in_alpha(x, a1, a2):
    lo, hi = sorted((a1, a2))
    assert cvar_alpha(x, lo) >= cvar_alpha(x, hi) - 1e-9 * (1 + np.abs(x).max())


@settings(max_examples=150, deadline=None)
@given(x=samples, a=alphas)
def test_cvar_var_ordering(x, a):
    tol = 1e-9 * (1 + np.abs(x).max())
    assert cvar_alpha(x, a) >= var_alpha(x, a) - tol
    assert var_alpha(x, a) >= x.min()
    assert cvar_alpha(x, 1.0) == pytest.approx(x.mean(), abs=tol)


@settings(max_examples=100, deadline=None)
@given(x=samples, a=alphas, c=st.floats(-100, 100), s=st.floats(0, 10))
def test_coherence(x, a, c, s):
    tol = 1e-8 * (1 + np.abs(x).max() * (1 + s) + abs(c))
    assert cvar_alpha(x + c, a) == pytest.approx(cvar_alpha(x, a) + c, abs=tol)
    assert cvar_alpha(s * x, a) == pytest.approx(s * cvar_alpha(x, a), abs=tol)


@settings(max_examples=200, deadline=None)
@given(a=samples, b=samples, alpha=st.sampled_from([0.25, 0.5, 1.0]))
def test_cvar_lipschitz_in_w1(a, b, alpha):
    assert abs(cvar_alpha(a, alpha) - cvar_alpha(b, alpha)) <= w1_exact_1d(a, b) / alpha + 1e-9 * (
        1 + np.abs(np.concatenate([a, b])).max()
    )


def test_interval_formula():
    x = np.array([1.0, 2.0, 3.0, 4.0])
    spec = RiskSpec(alpha=0.5, beta=0.05, H=1.0)
    eps2 = w1_radius(4, 1, 0.05, 1.0)
    c = cvar_certified_interval(x, spec)
    assert c.values["cvar"] == pytest.approx(3.5)
    assert c.values["lower"] == pytest.approx(3.5 - 2 * eps2)
    assert c.values["upper"] == pytest.approx(3.5 + 2 * eps2)
    assert c.radii["eps2"] == pytest.approx(eps2)
    assert c.confidence == pytest.approx(0.95)


def test_interval_hand_example():
    # emp 3.5, L0 = 1, alpha = 0.5, eps2 = 0.2 -> [3.1, 3.9]; pick rho so the radius is 0.2
    x = np.array([1.0, 2.0, 3.0, 4.0])
    rho = 0.2 / w1_radius(4, 1, 0.05, 1.0)
    c = cvar_certified_interval(x, RiskSpec(0.5, 0.05, 1.0, rho=rho))
    assert c.values["lower"] == pytest.approx(3.1)
    assert c.values["upper"] == pytest.approx(3.9)


def test_interval_degenerate_and_alpha_one():
    x = np.random.default_rng(2).normal(size=50)
    c0 = cvar_certified_interval(x, RiskSpec(0.3, 0.05, 1.0, rho=0.0))
    assert c0.values["lower"] == c0.values["upper"] == c0.values["cvar"]
    c1 = cvar_certified_interval(x, RiskSpec(1.0, 0.05, 1.0, L0=2.0, rho=1.5))
    assert c1.values["upper"] - c1.values["lower"] == pytest.approx(2 * 2.0 * c1.radii["eps2"])


def test_certificate_validation_and_roundtrip():
    with pytest.raises(OutOfRange):
        Certificate("x", {}, confidence=1.0)
    with pytest.raises(OutOfRange):
        Certificate("x", {}, confidence=0.5, radii={"eps": -1.0})
    c = cvar_certified_interval(np.arange(10.0), RiskSpec(0.5, 0.1, 1.0), seed=3)
    assert Certificate.from_dict(c.to_dict()) == c


def test_planner_table_trend():
    base = dict(beta=0.05, H=0.1)
    scale = calibrate_scale(2520, alpha=1.0, **base)
    N1 = plan_cvar_samples(RiskSpec(1.0, rho=scale, **base))
    N05 = plan_cvar_samples(RiskSpec(0.5, rho=scale, **base))
    assert N1 == 2520
    assert abs(N05 - 9835) <= 0.1 * 9835
    assert 3.8 <= N05 / N1 <= 4.0


def test_planner_vacuous_tolerance():
    assert plan_cvar_samples(RiskSpec(0.5, 0.05, H=1e9)) == 1


@settings(max_examples=60, deadline=None)
@given(
    alpha=st.floats(0.05, 1.0),
    beta=st.floats(0.001, 0.5),
    H=st.floats(0.01, 2.0),
    rho=st.floats(0.01, 5.0),
    n=st.integers(1, 5),
)
def test_planner_is_minimal(alpha, beta, H, rho, n):
    spec = RiskSpec(alpha, beta, H, rho=rho, n=n)
    try:
        N = plan_cvar_samples(spec)
    except OutOfRange:
        assume(False)
    half = lambda k: spec.L0 / alpha * w1_radius(k, n, beta, rho)
    assert half(N) <= H
    assert N == 1 or half(N - 1) > H
    if N <= 100_000:
        x = np.resize(np.random.default_rng(0).uniform(size=5), N)
        assert cvar_certified_interval(x, spec).values["half_width"] <= H


def test_closed_form_matches_planner_in_high_dim():
    spec = RiskSpec(0.5, 0.05, 0.5, rho=1.0, n=4)
    N = plan_cvar_samples(spec)
    cf = plan_cvar_samples_closed_form(spec)
    # the closed form over-approximates because it bounds both terms by the slower rate
    assert N <= cf * 1.0000001


def test_gamma_robustness():
    assert gamma_robustness(0.1) == pytest.approx(0.2)
    assert gamma_robustness(0.05) == pytest.approx(0.1)
    assert gamma_robustness(1.0) == 2.0
    with pytest.raises(OutOfRange):
        gamma_robustness(0.0)


def test_planner_limit():
    with pytest.raises(OutOfRange):
        plan_cvar_samples(RiskSpec(0.01, 0.05, H=1e-9, rho=10.0, n=3))
