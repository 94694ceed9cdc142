import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from onemax import DomainError, ProblemParams, ThresholdSpec, UnsupportedExponentError
from onemax.core import multiplicative_error
from onemax.quadrature import adaptive_simpson
from onemax.stochastic import (
    Dirac,
    DiscreteMatrix,
    Empirical,
    Independent,
    PairedSamples,
    UniformInterval,
    UniformMixture,
    coupling_fraction,
    expected_payoff_ratio,
    expected_ratio_bound,
    independent_uniform_closed_form,
    lambda_functional,
    lambda_mixture_lower_bound,
    lambda_multiplicative_uniform_lower_bound,
    lambda_uniform_lower_bound,
    monte_carlo_lambda,
    monte_carlo_upsilon,
    uniform_expansion_constant,
    upsilon_functional,
)

P5 = ProblemParams(5.0)
SPEC = ThresholdSpec(5 ** -0.75, 1.0, P5)


def quad_lambda(G, p, s):
    """Adaptive-Simpson oracle for Lambda, split at p and at the law's breakpoints."""
    if isinstance(G, (Dirac, Empirical)):
        atoms = [G.point] if isinstance(G, Dirac) else G.samples
        weights = [1.0] if isinstance(G, Dirac) else G.weights
        return sum(w * multiplicative_error(p, y) ** s for y, w in zip(atoms, weights))
    pieces = G.intervals if isinstance(G, UniformMixture) else (G,)
    wts = G.weights if isinstance(G, UniformMixture) else (1.0,)
    return sum(
        w * adaptive_simpson(lambda y: multiplicative_error(p, y) ** s, iv.lo, iv.hi, breakpoints=[p]) / iv.width
        for w, iv in zip(wts, pieces)
    )


# ---------------------------------------------------------------- distributions


def test_distribution_validation():
    with pytest.raises(DomainError):
        Dirac(0.5)
    with pytest.raises(DomainError):
        UniformInterval(3, 2)
    with pytest.raises(DomainError):
        UniformMixture((0.5, 0.6), ((1, 2), (3, 4)))
    with pytest.raises(DomainError):
        UniformMixture((0.5, 0.5), ((1, 3), (2, 4)))
    with pytest.raises(DomainError):
        Empirical([])
    with pytest.raises(DomainError):
        UniformInterval(1, 6).validate(P5)


def test_moments():
    u = UniformInterval(1, 3)
    assert u.mean() == pytest.approx(2.0)
    assert u.partial_moment(-1.0, 2.0) == pytest.approx(math.log(2) / 2)
    assert u.upper_moment(2.0, 2.0) == pytest.approx((27 - 8) / 6)
    e = Empirical([1, 2, 2, 4])
    assert e.mean() == pytest.approx(2.25)
    assert e.partial_moment(1.0, 2.0) == pytest.approx(1.25)


def test_moment_near_log_branch_is_continuous():
    u = UniformInterval(1.5, 4.0)
    at = u.partial_moment(-1.0, 3.0)
    near = u.partial_moment(-1.0 + 1e-10, 3.0)
    assert near == pytest.approx(at, abs=1e-9)


def test_mixture_sampling_is_inverse_cdf():
    mix = UniformMixture((0.25, 0.75), ((1, 2), (3, 5)))
    x = mix.sample(np.random.default_rng(0), 200_000)
    assert np.mean(x < 2.5) == pytest.approx(0.25, abs=0.005)
    assert np.all((x >= 1) & (x <= 5))
    assert not np.any((x > 2) & (x < 3))


# ---------------------------------------------------------------- Lambda / Upsilon


def test_lambda_examples():
    assert lambda_functional(Dirac(3.0), 3.0, 2.0) == 1.0
    assert lambda_functional(Dirac(4.0), 2.0, 3.0) == pytest.approx(0.125)
    # frozen from mpmath.quad of min(y/3, 3/y)^2 over [2.5, 3.5]
    assert lambda_functional(UniformInterval(2.5, 3.5), 3.0, 2.0) == pytest.approx(0.849867724867724868, abs=1e-12)


def test_lambda_rejects_small_exponent():
    with pytest.raises(DomainError):
        lambda_functional(Dirac(2.0), 2.0, 0.5)


def test_lambda_log_branch_s_one():
    G = UniformInterval(1.0, 5.0)
    assert lambda_functional(G, 2.5, 1.0) == pytest.approx(quad_lambda(G, 2.5, 1.0), abs=1e-10)


def test_upsilon_examples():
    assert upsilon_functional(Dirac(3.0), 3.0, 2.0) == 1.0
    assert upsilon_functional(Dirac(3.0), 4.5, 2.0) == pytest.approx((3 / 4.5) ** 2)
    # Simpson oracle agreement, and a frozen mpmath value
    F = UniformInterval(1.0, 5.0)
    oracle = adaptive_simpson(lambda p: p * multiplicative_error(p, 3.0) ** 2 / 4, 1, 5, breakpoints=[3]) / 3
    assert upsilon_functional(F, 3.0, 2.0) == pytest.approx(oracle, abs=1e-8)
    assert upsilon_functional(F, 3.0, 2.0) == pytest.approx(0.568304403009678198, abs=1e-12)


def test_upsilon_log_branch_s_two():
    F = UniformInterval(1.0, 5.0)
    oracle = adaptive_simpson(lambda p: p * multiplicative_error(p, 2.0) ** 2 / 4, 1, 5, breakpoints=[2]) / 3
    assert upsilon_functional(F, 2.0, 2.0) == pytest.approx(oracle, abs=1e-9)


def test_example_uniform_lower_bound():
    assert uniform_expansion_constant(2.0, P5) == pytest.approx(0.506666666666666667, abs=1e-15)
    low = lambda_uniform_lower_bound(3.0, 0.5, 2.0, P5)
    assert low == pytest.approx(0.706666666666666667, abs=1e-12)
    assert low <= lambda_functional(UniformInterval(2.5, 3.5), 3.0, 2.0)
    assert lambda_uniform_lower_bound(3.0, 1e-9, 2.0, P5) == pytest.approx(1.0, abs=1e-8)
    with pytest.raises(DomainError):
        lambda_uniform_lower_bound(3.0, 2.5, 2.0, P5)


def test_multiplicative_uniform_variant_matches_additive_call():
    for p, e in ((3.0, 0.1), (2.0, 0.4), (4.0, 0.2)):
        assert lambda_multiplicative_uniform_lower_bound(p, e, 2.5, P5) == lambda_uniform_lower_bound(p, e * p, 2.5, P5)


def test_mixture_single_interval_reduces_to_uniform_bound():
    mix = UniformMixture((1.0,), ((2.5, 3.5),))
    out = lambda_mixture_lower_bound(mix, 3.0, 2.0, P5)
    assert out.bound - out.residual == pytest.approx(lambda_uniform_lower_bound(3.0, 0.5, 2.0, P5), abs=1e-12)


def test_mixture_two_narrow_intervals_limit():
    w, eps = 0.3, 1e-7
    mix = UniformMixture((w, 1 - w), ((1.5, 1.5 + eps), (4.0, 4.0 + eps)))
    expected = w * (1.5 / 3) ** 2 + (1 - w) * (3 / 4) ** 2
    atoms = Empirical([1.5, 4.0], [w, 1 - w])
    assert lambda_mixture_lower_bound(mix, 3.0, 2.0, P5).bound == pytest.approx(expected, abs=1e-6)
    assert lambda_functional(atoms, 3.0, 2.0) == pytest.approx(expected, abs=1e-12)


def test_mixture_without_containing_interval():
    mix = UniformMixture((0.5, 0.5), ((1.0, 2.0), (4.0, 5.0)))
    out = lambda_mixture_lower_bound(mix, 3.0, 2.0, P5)
    assert out.bound == pytest.approx(0.5 * (1.5 / 3) ** 2 + 0.5 * (3 / 4.5) ** 2)
    assert out.bound <= lambda_functional(mix, 3.0, 2.0)


# ---------------------------------------------------------------- couplings


def test_expected_ratio_bound_examples():
    perfect = PairedSamples([3.0], [3.0])
    assert expected_ratio_bound(perfect, SPEC) == pytest.approx(SPEC.consistency)
    G = UniformInterval(2.0, 4.0)
    via_lambda = SPEC.consistency * lambda_functional(G, 3.0, 2.0)
    assert expected_ratio_bound(Independent(Dirac(3.0), G), SPEC) == pytest.approx(max(SPEC.r, via_lambda), rel=1e-12)


def test_independent_uniform_matches_double_quadrature():
    U = UniformInterval(1.0, 5.0)
    oracle = adaptive_simpson(
        lambda p: adaptive_simpson(lambda y: p * multiplicative_error(p, y) ** 2 / 16, 1, 5, breakpoints=[p]),
        1, 5) / 3
    assert coupling_fraction(Independent(U, U), 2.0) == pytest.approx(oracle, abs=1e-6)
    assert expected_ratio_bound(Independent(U, U), SPEC) == pytest.approx(max(SPEC.r, SPEC.consistency * oracle), abs=1e-6)


def test_discrete_matrix_validation():
    with pytest.raises(DomainError):
        DiscreteMatrix([1, 2], [0.5, 0.5], [1, 2], [0.5, 0.5], [[0.5, 0.0], [0.0, 0.4]])
    with pytest.raises(DomainError):
        DiscreteMatrix([1, 2], [0.6, 0.4], [1, 2], [0.5, 0.5], [[0.5, 0.0], [0.0, 0.5]])
    m = DiscreteMatrix([1, 2], [0.5, 0.5], [1, 2], [0.5, 0.5], [[0.5, 0.0], [0.0, 0.5]])
    assert coupling_fraction(m, 3.0) == pytest.approx(1.0)


def test_closed_form_matches_quadrature_at_reference_point():
    # (c1, c2, s) = (1, 5, 3); frozen mpmath double quadrature = 0.381333...
    corrected = independent_uniform_closed_form(1.0, 5.0, 3.0, P5)
    assert corrected == pytest.approx(0.381333333333333333, abs=1e-12)
    U = UniformInterval(1.0, 5.0)
    assert corrected == pytest.approx(coupling_fraction(Independent(U, U), 3.0), abs=1e-4)


def test_closed_form_as_printed_mismatch_is_logged(capsys):
    printed = independent_uniform_closed_form(1.0, 5.0, 3.0, P5, form="as_printed")
    oracle = 0.381333333333333333
    print(f"as-printed closed form at (1, 5, 3): {printed:.6g} vs quadrature {oracle:.6g}")
    assert "as-printed" in capsys.readouterr().out
    assert math.isfinite(printed)


def test_closed_form_singular_exponents():
    for s in (1.0, 2.0):
        with pytest.raises(UnsupportedExponentError):
            independent_uniform_closed_form(1.0, 5.0, s, P5)
    with pytest.raises(DomainError):
        independent_uniform_closed_form(3.0, 2.0, 3.0, P5)


def test_closed_form_degenerate_interval():
    assert independent_uniform_closed_form(3.0, 3.0 + 1e-4, 3.0, P5) == pytest.approx(1.0, abs=1e-3)


def test_jensen_direction_on_random_discrete_couplings():
    rng = np.random.default_rng(7)
    grid = np.linspace(1, 5, 2001)
    n = 2001
    for _ in range(50):
        k, m = rng.integers(1, 6, size=2)
        fa = np.sort(rng.choice(grid, k, replace=False))
        ga = np.sort(rng.choice(grid, m, replace=False))
        joint = rng.random((k, m))
        joint /= joint.sum()
        c = DiscreteMatrix(fa, joint.sum(1), ga, joint.sum(0), joint)
        realized = expected_payoff_ratio(c, SPEC, n)
        assert realized >= expected_ratio_bound(c, SPEC) - 4 / (n - 1)


# ---------------------------------------------------------------- properties

points = st.floats(1.0, 5.0)


@st.composite
def laws(draw):
    kind = draw(st.sampled_from(["dirac", "uniform", "mixture", "empirical"]))
    if kind == "dirac":
        return Dirac(draw(points))
    if kind == "uniform":
        a, b = sorted(draw(st.lists(points, min_size=2, max_size=2, unique=True)))
        return UniformInterval(a, b) if b - a > 1e-6 else Dirac(a)
    if kind == "mixture":
        cuts = sorted(draw(st.lists(points, min_size=4, max_size=4, unique=True)))
        if min(np.diff(cuts)) < 1e-6:
            return Dirac(cuts[0])
        w = draw(st.floats(0.05, 0.95))
        return UniformMixture((w, 1 - w), ((cuts[0], cuts[1]), (cuts[2], cuts[3])))
    return Empirical(draw(st.lists(points, min_size=1, max_size=20)))


@given(G=laws(), p=points, s=st.floats(1.0, 6.0))
def test_lambda_in_unit_interval_and_matches_oracle(G, p, s):
    value = lambda_functional(G, p, s)
    assert 0 < value <= 1 + 1e-12
    assert value == pytest.approx(quad_lambda(G, p, s), abs=1e-8)


@given(F=laws(), y=points, s=st.floats(1.0, 6.0))
def test_upsilon_in_unit_interval(F, y, s):
    assert 0 < upsilon_functional(F, y, s) <= 1 + 1e-12


@given(F=laws(), G=laws(), s=st.floats(1.0, 5.0))
def test_separability_two_forms_agree(F, G, s):
    a = coupling_fraction(Independent(F, G), s, method="lambda")
    b = coupling_fraction(Independent(F, G), s, method="upsilon")
    assert a == pytest.approx(b, abs=1e-9)


@given(p=st.floats(1.05, 4.95), frac=st.floats(0.01, 1.0), s=st.floats(1.0, 6.0))
def test_uniform_lower_bound_dominance(p, frac, s):
    eps = frac * min(5 - p, p - 1)
    low = lambda_uniform_lower_bound(p, eps, s, P5)
    assert low <= lambda_functional(UniformInterval.centered(p, eps), p, s) + 1e-12


@given(cuts=st.lists(points, min_size=4, max_size=4, unique=True), w=st.floats(0.05, 0.95),
       p=points, s=st.floats(1.0, 5.0))
def test_mixture_bound_below_exact(cuts, w, p, s):
    cuts = sorted(cuts)
    if min(np.diff(cuts)) < 1e-6:
        return
    mix = UniformMixture((w, 1 - w), ((cuts[0], cuts[1]), (cuts[2], cuts[3])))
    assert lambda_mixture_lower_bound(mix, p, s, P5).bound <= lambda_functional(mix, p, s) + 1e-9


def test_closed_forms_agree_with_monte_carlo():
    rng = np.random.default_rng(2024)
    for case in range(20):
        G = UniformMixture((0.4, 0.6), ((1.0, 1.0 + rng.random() * 1.5), (3.0, 3.0 + rng.random() * 2.0)))
        p = float(rng.uniform(1, 5))
        s = float(rng.uniform(1, 4))
        mean, se = monte_carlo_lambda(G, p, s, 1_000_000, np.random.default_rng(case))
        assert abs(mean - lambda_functional(G, p, s)) <= 3 * se + 1e-12
        F = UniformInterval(1.0, float(rng.uniform(2, 5)))
        y = float(rng.uniform(1, 5))
        mean, se = monte_carlo_upsilon(F, y, s, 1_000_000, np.random.default_rng(100 + case))
        assert abs(mean - upsilon_functional(F, y, s)) <= 3 * se + 1e-12
