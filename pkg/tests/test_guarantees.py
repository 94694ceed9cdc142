import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from onemax import DomainError, ProblemParams, ThresholdSpec
from onemax.guarantees import (
    GuaranteeParams,
    additive_beta_star,
    additive_bound,
    additive_slope_witnesses,
    beta_one_sided_bounds,
    brittleness_witness,
    lower_bound_exponent,
    multiplicative_bound,
    prior_randomized_bounds,
    smoothness_exponent,
    verify_additive_bound,
    verify_multiplicative_bound,
)

P5 = ProblemParams(5.0)
R34 = 5 ** -0.75


def spec(rho=1.0, r=R34, params=P5):
    return ThresholdSpec(r, rho, params)


def gp(rho=1.0, r=R34, params=P5):
    return GuaranteeParams.from_spec(spec(rho, r, params))


def test_smoothness_exponent_examples():
    assert smoothness_exponent(spec(1.0)) == pytest.approx(2.0, abs=1e-12)
    assert smoothness_exponent(spec(0.5)) == pytest.approx(4.0, abs=1e-12)
    for theta in (2.0, 5.0, 28.0):
        p = ProblemParams(theta)
        assert smoothness_exponent(ThresholdSpec(theta ** -0.5, 1.0, p)) == 1.0


def test_smoothness_exponent_brittle_sentinel():
    assert smoothness_exponent(spec(0.0)) == math.inf
    assert smoothness_exponent(ThresholdSpec(5 ** -0.5, 0.0, P5)) == 1.0


def test_smoothness_exponent_needs_r_theta_above_one():
    with pytest.raises(DomainError):
        smoothness_exponent(ThresholdSpec(0.2, 1.0, P5))


def test_multiplicative_bound_examples():
    g = gp()
    assert multiplicative_bound(g, 1.0) == pytest.approx(0.668740304976422024, abs=1e-12)
    assert multiplicative_bound(g, 0.9) == pytest.approx(0.541679647030901839, abs=1e-12)
    assert multiplicative_bound(g, 0.2) == pytest.approx(0.299069756244244108, abs=1e-12)
    with pytest.raises(DomainError):
        multiplicative_bound(g, 0.1)
    with pytest.raises(DomainError):
        multiplicative_bound(g, 1.1)


def test_multiplicative_bound_brittle():
    g = gp(0.0)
    assert multiplicative_bound(g, 1.0) == pytest.approx(spec().consistency)
    assert multiplicative_bound(g, 0.999999) == pytest.approx(R34)


def test_beta_star_examples():
    # (0.55279 / 1.49535) * 2.01877, evaluated with mpmath
    assert additive_beta_star(spec()) == pytest.approx(0.746283351744202048, abs=1e-12)
    assert additive_beta_star(ThresholdSpec(5 ** -0.5, 1.0, P5)) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(DomainError):
        additive_beta_star(ThresholdSpec(0.2, 1.0, P5))


def test_beta_star_is_max_of_one_sided_bounds():
    for lam in (0.1, 0.3, 0.5, 0.8, 0.95):
        s = ThresholdSpec.from_lambda(lam, 1.0, P5)
        assert additive_beta_star(s) == pytest.approx(max(beta_one_sided_bounds(s)), rel=1e-12)


def test_additive_bound_examples():
    g = gp()
    assert additive_bound(g, 0.0, 3.0) == pytest.approx(spec().consistency)
    assert additive_bound(g, 0.3, 3.0) == pytest.approx(0.594111969802001819, abs=1e-12)
    assert additive_bound(g, 4.0, 1.0) == pytest.approx(R34)
    with pytest.raises(DomainError):
        additive_bound(g, 0.1, 0.5)


def test_lower_bound_exponent_examples():
    for theta in (2.0, 5.0, 28.0):
        p = ProblemParams(theta)
        assert lower_bound_exponent(ThresholdSpec(theta ** (-2 / 3), 1, p)) == pytest.approx(1.0, abs=1e-12)
        assert lower_bound_exponent(ThresholdSpec(theta ** -0.5, 1, p)) == pytest.approx(0.0, abs=1e-12)
    assert lower_bound_exponent(spec()) == pytest.approx(2.0, abs=1e-12)


def test_brittleness_witness_example():
    r0, r1 = brittleness_witness(spec(), 0.01, 100_000)
    # exact grid arithmetic in mpmath: rho=0 takes payoff 1, rho=1 accepts the grid point above varphi(y)
    assert r0 == pytest.approx(0.299970302643064767, abs=1e-12)
    assert r1 == pytest.approx(0.742562911900840825, abs=1e-12)
    assert r1 - r0 >= 0.3


def test_brittleness_witness_larger_delta_respects_bounds():
    delta, n = 0.3, 100_000
    s = spec()
    r0, r1 = brittleness_witness(s, delta, n)
    err = (1 / s.r - delta) / (1 / s.r + delta)
    slack = 4 / (n - 1)
    assert r0 >= multiplicative_bound(gp(0.0), err) - slack
    assert r1 >= multiplicative_bound(gp(1.0), err) - slack


def test_brittleness_witness_precondition():
    with pytest.raises(DomainError):
        brittleness_witness(spec(), 2.0, 1000)
    with pytest.raises(DomainError):
        brittleness_witness(spec(), 0.0, 1000)


def test_verify_multiplicative_bound_reference_setup():
    for rho in (0.5, 1.0):
        report = verify_multiplicative_bound(spec(rho), 10_000, 200, 200)
        assert report.ok and report.min_slack >= -1e-9


def test_consistency_case_in_sweep():
    report = verify_multiplicative_bound(spec(), 10_000, 2, 2)
    assert report.min_slack >= -1e-9


def test_additive_witness_slopes_reach_beta_star():
    s = spec()
    w1, w2 = additive_slope_witnesses(s, 1e-6, 10_000_000)
    b1, b2 = beta_one_sided_bounds(s)
    assert w1 == pytest.approx(b1, abs=1e-4)
    assert w2 == pytest.approx(b2, abs=1e-4)
    assert max(w1, w2) == pytest.approx(additive_beta_star(s), abs=1e-4)


def test_prior_randomized_bounds():
    c, rob = prior_randomized_bounds(1.0, R34, P5)
    assert c * R34 * 5 == pytest.approx((math.e - 1) ** 2, rel=1e-12)
    assert (math.e - 1) ** 2 == pytest.approx(2.95249244201255976, abs=1e-12)
    assert rob == pytest.approx((math.e - 1) / math.sqrt(5))
    small, _ = prior_randomized_bounds(1e-8, R34, P5)
    assert small * R34 * 5 == pytest.approx(1.0, abs=1e-6)
    c_neg, _ = prior_randomized_bounds(1.0, R34, P5, variant="exp_neg")
    assert c_neg * R34 * 5 == pytest.approx((1 - math.exp(-1)) ** 2)
    with pytest.raises(DomainError):
        prior_randomized_bounds(0.0, R34, P5)
    with pytest.raises(DomainError):
        prior_randomized_bounds(0.5, R34, P5, variant="other")


specs = st.builds(
    lambda theta, lam, rho: ThresholdSpec.from_lambda(lam, rho, ProblemParams(theta)),
    st.floats(1.5, 40.0), st.floats(0.05, 1.0), st.floats(0.0, 1.0),
)


@given(s=specs, a=st.floats(0, 1), b=st.floats(0, 1))
def test_multiplicative_bound_monotone(s, a, b):
    g = GuaranteeParams.from_spec(s)
    lo = 1 / s.theta + min(a, b) * (1 - 1 / s.theta)
    hi = 1 / s.theta + max(a, b) * (1 - 1 / s.theta)
    assert multiplicative_bound(g, lo) <= multiplicative_bound(g, hi) + 1e-15
    assert multiplicative_bound(g, 1.0) * s.r * s.theta == pytest.approx(1.0, abs=1e-12)


@given(s=specs, e1=st.floats(0, 50), e2=st.floats(0, 50), pf=st.floats(0, 1))
def test_additive_bound_properties(s, e1, e2, pf):
    g = GuaranteeParams.from_spec(s.with_rho(1.0))
    p = 1 + pf * (s.theta - 1)
    lo, hi = sorted((e1, e2))
    assert additive_bound(g, 0.0, p) == pytest.approx(s.consistency)
    assert additive_bound(g, hi, p) <= additive_bound(g, lo, p)
    assert additive_bound(g, hi, p) >= s.r


@given(s=specs)
def test_rho_one_attains_lower_bound_exponent(s):
    s1 = s.with_rho(1.0)
    assert smoothness_exponent(s1) == pytest.approx(max(1.0, lower_bound_exponent(s1)), rel=1e-12)


@pytest.mark.parametrize("theta", [2.0, 5.0, 28.0])
@pytest.mark.parametrize("lam", [0.2, 0.5, 0.8])
@pytest.mark.parametrize("rho", [0.25, 0.5, 1.0])
def test_sweep_grid_dominance(theta, lam, rho):
    s = ThresholdSpec.from_lambda(lam, rho, ProblemParams(theta))
    assert verify_multiplicative_bound(s, 2000, 60, 60).ok
    if rho == 1.0:
        assert verify_additive_bound(s, 2000, 60, 60).ok
