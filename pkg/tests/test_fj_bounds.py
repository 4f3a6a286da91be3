import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ecstore.core import Cluster, CodeSpec, Exponential, FileSpec, Server, validate_workload
from ecstore.errors import BoundInfeasible, InstabilityError
from ecstore.fj_bounds import (
    fj_approx_exp,
    fj_hetero_lower,
    fj_hetero_stability,
    fj_hetero_upper,
    fj_lower_exp,
    fj_lower_sexp,
    fj_upper_exp,
    fj_upper_general,
)
from ecstore.sim import FORK_JOIN, PolicyConfig, run_scenario
from ecstore.specfun import harmonic


def test_golden_points():
    assert fj_upper_exp(4, 2, 0.3, 0.5) == pytest.approx(1.6410, abs=5e-5)
    assert fj_lower_exp(4, 2, 0.3, 0.5) == pytest.approx(1.4216, abs=5e-5)
    assert fj_approx_exp(4, 2, 0.3, 0.5) == pytest.approx(1.5476, abs=5e-5)
    for f in (fj_upper_exp, fj_lower_exp, fj_approx_exp):
        assert f(2, 1, 0.3, 0.5) == pytest.approx(1 / 0.7, rel=1e-12)


def test_approx_large_code():
    assert fj_approx_exp(24, 1, 0.45, 1 / 24) == pytest.approx(1.8182, abs=5e-5)


@given(st.floats(0.01, 5.0), st.floats(0.0, 0.99))
def test_single_server_collapse(mu, frac):
    lam = frac * mu
    exact = 1 / (mu - lam)
    for f in (fj_upper_exp, fj_lower_exp, fj_approx_exp):
        assert f(1, 1, lam, mu) == pytest.approx(exact, rel=1e-12)


def test_lower_zero_load_is_order_statistic():
    assert fj_lower_exp(6, 6, 0.0, 2.0) == pytest.approx(harmonic(0, 6) / 2.0, rel=1e-14)


def test_upper_infeasible_region_is_typed():
    with pytest.raises(BoundInfeasible) as info:
        fj_upper_exp(10, 5, 1.9, 1.0)
    assert info.value.limit is not None and info.value.limit < 1.9
    with pytest.raises(InstabilityError):
        fj_lower_exp(4, 2, 5.0, 0.5)


@settings(max_examples=80)
@given(st.integers(1, 12), st.integers(1, 12), st.floats(0.1, 3.0), st.floats(0.0, 1.0))
def test_lower_below_upper(n, k, mu, frac):
    if k > n:
        n, k = k, n
    lam = frac * mu
    try:
        up = fj_upper_exp(n, k, lam, mu)
        lo = fj_lower_exp(n, k, lam, mu)
    except (BoundInfeasible, InstabilityError):
        return
    assert lo <= up * (1 + 1e-12)


@pytest.mark.parametrize("n,k", [(4, 2), (8, 4), (10, 3)])
def test_bounds_monotone_in_lambda(n, k):
    for f in (fj_upper_exp, fj_lower_exp, fj_approx_exp):
        values = []
        for lam in np.linspace(0.0, 2.0, 60):
            try:
                values.append(f(n, k, lam, 0.5))
            except (BoundInfeasible, InstabilityError):
                break
        assert len(values) > 3
        assert np.all(np.diff(values) >= 0)


def test_general_deterministic_collapse():
    mu, lam = 2.0, 0.7
    expected = 1 / mu + lam * (1 / mu**2) / (2 * (1 - lam / mu))
    assert fj_upper_general(10, 5, lam, 1 / mu, 0.0) == pytest.approx(expected, rel=1e-14)


def test_general_single_chunk_mean():
    # k=1: mean term has no sigma inflation
    value = fj_upper_general(6, 1, 0.0, 0.5, 2.0)
    assert value == pytest.approx(0.5, rel=1e-14)


def test_general_golden_value():
    value = fj_upper_general(10, 5, 0.2, 1.0, 1.0)
    assert value >= fj_upper_exp(10, 5, 0.2, 1.0)
    assert value == pytest.approx(2.4935423988822936, rel=1e-12)


def test_sexp_lower_zero_load():
    n, k, alpha = 6, 3, 2.0
    expected = sum(1 / ((n - j) * alpha) for j in range(k))
    assert fj_lower_sexp(n, k, 0.0, 0.0, alpha) == pytest.approx(expected, rel=1e-14)
    assert fj_lower_sexp(5, 1, 0.0, 0.3, 2.0) == pytest.approx(0.3 + 1 / 10, rel=1e-14)


def test_sexp_lower_golden_value():
    assert fj_lower_sexp(12, 7, 0.1, 0.01, 18.23) == pytest.approx(0.05501418296120463, rel=1e-12)


def test_hetero_stability():
    lam, size, n, mu = 0.1, 1.0, 6, 0.2
    assert fj_hetero_stability([(lam, 3, size)], n, mu) == (lam * size < n * mu)
    assert fj_hetero_stability([(0.0, 2, 1.0), (0.0, 4, 1.0)], 6, 0.2)
    files = [(0.1, 2, 1.0), (0.1, 4, 1.0)]
    lhs = (2 * 0.1 + 4 * 0.1) * (0.1 * 1 / 2 + 0.1 * 1 / 4)
    assert fj_hetero_stability(files, 6, 0.2) == (lhs < 6 * 0.2 * 0.2)


@given(st.integers(1, 10), st.floats(0.1, 2.0), st.floats(0.5, 3.0), st.floats(0.0, 0.5))
def test_hetero_single_class_reduces(k, mu, size, frac):
    n = k + 3
    mu1 = k * mu / size
    lam = frac * mu1
    try:
        upper = fj_upper_exp(n, k, lam, mu1)
    except BoundInfeasible:
        upper = None
    if upper is not None:
        assert fj_hetero_upper(0, [(lam, k, size)], n, mu) == pytest.approx(upper, rel=1e-12)
    assert fj_hetero_lower(0, [(lam, k, size)], n, mu) == pytest.approx(fj_lower_exp(n, k, lam, mu1), rel=1e-12)


def test_hetero_bracket_against_simulation():
    n, mu = 6, 1.0
    # chunk size l_i = k_i keeps the per-file rate k_i mu / l_i equal to mu on every server
    spec = [(0.25, 2, 2.0), (0.15, 4, 4.0)]
    cluster = Cluster(tuple(Server(f"s{j}", Exponential(mu)) for j in range(n)))
    files = [FileSpec(f"f{i}", lam, CodeSpec(n, k), tuple(cluster.ids)) for i, (lam, k, _) in enumerate(spec)]
    wl = validate_workload(files, cluster)
    rep = run_scenario(wl, PolicyConfig(FORK_JOIN), jobs=100_000, seed=4)
    for i in range(2):
        lo = fj_hetero_lower(i, spec, n, mu)
        up = fj_hetero_upper(i, spec, n, mu)
        m, ci = rep.per_file_mean[i], rep.per_file_ci[i]
        assert lo <= m + ci and m - ci <= up
