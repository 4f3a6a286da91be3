import math
from fractions import Fraction

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, special

from ecstore.errors import DomainError, SeriesDivergence
from ecstore.specfun import (
    HypergeometricSpec,
    cnk_constant,
    exp_order_stat_moments,
    harmonic,
    hyp,
    hypergeometric_pFq,
    integral_identity_closed,
    integral_identity_lhs,
    integral_identity_rhs,
    lower_incomplete_gamma,
    order_stat_cdf,
)


def test_harmonic_examples():
    assert harmonic(2, 4) == pytest.approx(7 / 12, rel=1e-15)
    assert harmonic(0, 1) == 1.0
    assert harmonic(2, 4, 2) == pytest.approx(25 / 144, rel=1e-15)
    assert harmonic(3, 3) == 0.0


@given(st.integers(0, 400), st.integers(0, 400), st.integers(1, 3))
def test_harmonic_telescoping_exact(x, y, z):
    x, y = min(x, y), max(x, y)
    assert harmonic(x, y, z) == harmonic(0, y, z) - harmonic(0, x, z)


def test_harmonic_domain():
    with pytest.raises(DomainError):
        harmonic(5, 2)


def test_order_stat_moments():
    assert exp_order_stat_moments(2, 2, 1.0) == pytest.approx((1.5, 1.25), rel=1e-15)
    assert exp_order_stat_moments(24, 12, 0.5)[0] == pytest.approx(1.3454949990856574, rel=1e-15)
    assert exp_order_stat_moments(1, 1, 2.0)[0] == 0.5


def test_order_stat_mean_monte_carlo():
    x = np.sort(np.random.default_rng(5).exponential(2.0, size=(1_000_000, 24)), axis=1)[:, 11]
    mean = exp_order_stat_moments(24, 12, 0.5)[0]
    assert abs(x.mean() - mean) < 3 * x.std() / math.sqrt(len(x))


def test_order_stat_cdf_examples():
    assert order_stat_cdf(2, 1, 0.5) == pytest.approx(0.75, rel=1e-15)
    assert order_stat_cdf(5, 5, 0.3) == pytest.approx(0.3**5, rel=1e-13)
    assert order_stat_cdf(5, 2, 0.0) == 0.0


@given(st.integers(1, 12), st.floats(0, 1), st.floats(0, 1))
def test_order_stat_cdf_monotone(n, f1, f2):
    lo, hi = min(f1, f2), max(f1, f2)
    for j in range(1, n + 1):
        assert order_stat_cdf(n, j, lo) <= order_stat_cdf(n, j, hi) + 1e-15
        if j < n:
            assert order_stat_cdf(n, j + 1, hi) <= order_stat_cdf(n, j, hi) + 1e-15


def test_hypergeometric_at_zero():
    assert hyp((1.5, 2.0), (3.0,), 0.0) == 1.0


def test_hypergeometric_closed_forms():
    assert hyp((2.0,), (), 0.3, tol=1e-14) == pytest.approx((1 - 0.3) ** -2, rel=1e-10)
    assert hyp((1.0, 1.0), (2.0,), 0.5, tol=1e-14) == pytest.approx(-math.log(0.5) / 0.5, rel=1e-10)


def exact_series(a, b, z, terms):
    """Exact rational partial sum, used as a reference for small cases."""
    total = Fraction(0)
    term = Fraction(1)
    for n in range(terms):
        total += term
        ratio = Fraction(z) / (n + 1)
        for ai in a:
            ratio *= Fraction(ai) + n
        for bi in b:
            ratio /= Fraction(bi) + n
        term *= ratio
    return total


@pytest.mark.parametrize(
    "a,b,z",
    [((1, 1, 3), (2, 5), Fraction(1, 3)), ((1, 1, 2), (2, 3), Fraction(3, 5)), ((2,), (), Fraction(1, 10)), ((1, 2, 4), (3, 7), Fraction(9, 10))],
)
def test_hypergeometric_vs_exact_rationals(a, b, z):
    ref = exact_series(a, b, z, 400)
    got = hypergeometric_pFq(HypergeometricSpec(a, b, float(z), 1e-12))
    assert got.value == pytest.approx(float(ref), rel=1e-10)


@settings(max_examples=40, deadline=None)
@given(
    st.lists(st.floats(0.1, 5.0), min_size=1, max_size=3),
    st.lists(st.floats(0.5, 6.0), min_size=2, max_size=2),
    st.floats(-0.9, 0.9),
)
def test_hypergeometric_vs_mpmath(a, b, z):
    b = b[: max(len(a) - 1, 1)]
    with mpmath.workdps(50):
        ref = float(mpmath.hyper(a, b, z))
    assert hyp(a, b, z) == pytest.approx(ref, rel=1e-10, abs=1e-14)


def test_hypergeometric_rejects_bad_denominator():
    with pytest.raises(DomainError):
        HypergeometricSpec((1.0,), (-2.0,), 0.5)


def test_hypergeometric_rejects_divergent_order():
    with pytest.raises(DomainError):
        hyp((1.0, 2.0, 3.0), (4.0,), 0.1)
    assert hyp((-2.0, 2.0, 3.0), (4.0,), 0.1) == pytest.approx(1 - 2 * 6 / 4 * 0.1 + 2 * 6 * 12 / (4 * 5 * 2) * 0.01, rel=1e-14)


def test_hypergeometric_divergence_carries_partial_sum():
    with pytest.raises(SeriesDivergence) as info:
        hypergeometric_pFq(HypergeometricSpec((1.0, 1.0), (2.0,), 0.999999, 1e-12), max_terms=50)
    assert info.value.partial_sum > 1.0


def test_integral_identity_large_c_limit():
    assert integral_identity_lhs(0, 0, 40.0, 1.0) == pytest.approx(1.0, abs=1e-9)


def test_integral_identity_random_tuples():
    rng = np.random.default_rng(20)
    for _ in range(20):
        p = int(rng.integers(0, 9))
        q = int(rng.integers(0, p + 1))
        c = float(rng.uniform(0.1, 3.0))
        mu = float(rng.uniform(0.1, 2.0))
        assert integral_identity_lhs(p, q, c, mu) == pytest.approx(integral_identity_rhs(p, q, c, mu), rel=1e-8)


@pytest.mark.parametrize("m,c,mu", [(1, 1.0, 0.5), (4, 2.0, 1.3), (12, 0.7, 0.5)])
def test_integral_identity_closed_form(m, c, mu):
    ref, _ = integrate.quad(lambda x: m * mu * x * math.exp(-mu * x) * (1 - math.exp(-mu * x)) ** (m - 1), 0, c, epsabs=1e-14)
    assert integral_identity_closed(m, c, mu) == pytest.approx(ref, rel=1e-10)


def test_incomplete_gamma_examples():
    assert lower_incomplete_gamma(1.0, math.log(2)) == pytest.approx(0.5, rel=1e-14)
    assert lower_incomplete_gamma(3.0, 0.0) == 0.0
    ref, _ = integrate.quad(lambda t: t * math.exp(-t), 0, 1)
    assert lower_incomplete_gamma(2.0, 1.0) == pytest.approx(ref, rel=1e-12)
    assert ref == pytest.approx(0.264241, abs=1e-6)


@given(st.floats(0.2, 30.0), st.floats(0.0, 80.0))
def test_incomplete_gamma_vs_scipy(a, x):
    ref = special.gammainc(a, x) * special.gamma(a)
    assert lower_incomplete_gamma(a, x) == pytest.approx(ref, rel=1e-10, abs=1e-300)


def test_cnk_small_cases():
    assert cnk_constant(1, 1) == pytest.approx(1.0, abs=1e-12)
    assert cnk_constant(2, 1) == pytest.approx(2.0, abs=1e-12)


def test_cnk_matches_dense_grid():
    x = np.linspace(0.0, 1.0, 1_000_001)[1:-1]
    ix = special.betainc(5, 6, x)
    grid = (ix * (1 - ix) / (x * (1 - x))).max()
    value = cnk_constant(10, 5)
    assert value >= grid - 1e-12
    assert value == pytest.approx(grid, rel=1e-8)
    assert value == pytest.approx(1.0110955241317812, rel=1e-10)
