import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ecstore.errors import DomainError
from ecstore.relaunch import (
    ForkPlan,
    completion_count_pmf,
    conditional_completion_mean,
    mean_completion_time,
    mean_fork_time,
    mean_utilization_cost,
    stage0_interservice_mean,
    stage1_interservice_mean,
    tradeoff_frontier,
)
from ecstore.sim import single_fork_monte_carlo
from ecstore.specfun import harmonic

N, K, C, MU = 24, 12, 1.0, 0.5


def plan(n0, l0, n=N, k=K, c=C, mu=MU):
    return ForkPlan(n, k, n0, l0, c, mu)


def test_plan_validation():
    with pytest.raises(DomainError):
        ForkPlan(24, 12, 10, 11, 1.0, 0.5)
    with pytest.raises(DomainError):
        ForkPlan(24, 25, 24, 1, 1.0, 0.5)
    with pytest.raises(DomainError):
        ForkPlan(24, 12, 24, 1, 1.0, 0.0)


def test_pmf_examples():
    assert completion_count_pmf(plan(12, 12)) == [1.0]
    assert completion_count_pmf(plan(16, 4, c=0.0)) == [1.0] + [0.0] * 12
    p = completion_count_pmf(plan(14, 12))
    assert p == pytest.approx([0.367879, 0.477303, 0.154818], abs=1e-6)


def test_pmf_against_order_statistics_simulation():
    # at t1 the two stragglers are in their exponential phase; count those done within c
    rng = np.random.default_rng(11)
    done = (rng.exponential(1 / MU, (1_000_000, 2)) <= C).sum(axis=1)
    freq = np.bincount(done, minlength=3) / done.size
    p = np.array(completion_count_pmf(plan(14, 12)))
    se = np.sqrt(p * (1 - p) / done.size)
    assert np.all(np.abs(freq - p) < 3 * se)


@settings(max_examples=60)
@given(st.integers(1, 24), st.integers(1, 12), st.floats(0.0, 5.0), st.floats(0.05, 3.0))
def test_pmf_sums_to_one(n0, l0, c, mu):
    if l0 > n0:
        return
    assert sum(completion_count_pmf(ForkPlan(24, 12, n0, l0, c, mu))) == pytest.approx(1.0, abs=1e-12)


def test_stage0_examples():
    p = ForkPlan(8, 4, 4, 2, 1.0, 0.5)
    assert stage0_interservice_mean(1, p) == pytest.approx(1.5)
    assert stage0_interservice_mean(2, p) == pytest.approx(1 / 1.5)
    with pytest.raises(DomainError):
        stage0_interservice_mean(3, p)


@pytest.mark.parametrize("n0,l0", [(12, 12), (16, 5), (24, 1)])
def test_stage0_sum_is_fork_time(n0, l0):
    p = plan(n0, l0)
    total = sum(stage0_interservice_mean(r, p) for r in range(1, l0 + 1))
    assert total == pytest.approx(mean_fork_time(p), rel=1e-14)
    assert total == pytest.approx(C + harmonic(n0 - l0, n0) / MU, rel=1e-14)


def test_fork_time_all_stage0():
    assert mean_fork_time(plan(12, 12)) == pytest.approx(7.206421356421356, rel=1e-12)


def truncated_order_stat(r, m, c, mu, reps, seed):
    """Mean of the r-th smallest of m Exp(mu) draws conditioned to lie below c, by inversion."""
    rng = np.random.default_rng(seed)
    u = rng.random((reps, m))
    x = -np.log1p(-u * (-math.expm1(-mu * c))) / mu
    x.sort(axis=1)
    col = x[:, r - 1]
    return col.mean(), col.std() / math.sqrt(reps)


@pytest.mark.parametrize("r,m", [(1, 1), (2, 3), (1, 3), (3, 3)])
def test_conditional_mean_against_simulation(r, m):
    p = plan(15, 12)
    mean, se = truncated_order_stat(r, m, C, MU, 1_000_000, 30 + r + m)
    assert abs(conditional_completion_mean(r, m, p) - mean) < 3 * se


def test_conditional_mean_vanishing_window():
    values = [conditional_completion_mean(1, 2, plan(16, 12, c=c)) for c in (1e-2, 1e-4, 1e-6)]
    assert values[-1] < 1e-6 and values[0] > values[1] > values[2]
    assert conditional_completion_mean(1, 2, plan(16, 12, c=0.0)) == 0.0


def test_conditional_mean_domain():
    with pytest.raises(DomainError):
        conditional_completion_mean(2, 1, plan(16, 12))
    with pytest.raises(DomainError):
        conditional_completion_mean(1, 5, plan(16, 12))


@pytest.mark.parametrize("l0", [1, 4, 7, 12])
def test_no_extra_servers_is_order_statistic_tail(l0):
    p = plan(24, l0)
    total = sum(stage1_interservice_mean(r, p) for r in range(1, K - l0 + 1))
    assert total == pytest.approx((harmonic(N - K, N) - harmonic(N - l0, N)) / MU, rel=1e-10, abs=1e-14)


def test_stage1_domain_and_empty_sum():
    with pytest.raises(DomainError):
        stage1_interservice_mean(1, plan(16, 12))
    # l0 = k leaves no stage-1 gaps, so E[S] is the fork time
    assert mean_completion_time(plan(16, 12)) == mean_fork_time(plan(16, 12))


def stage1_gaps_simulation(p, reps, seed):
    """Mean gaps between successive completions after t1, with the extra servers launched at t1."""
    rng = np.random.default_rng(seed)
    x = p.c + rng.exponential(1 / p.mu, (reps, p.n))
    first = np.sort(x[:, : p.n0], axis=1)
    t1 = first[:, p.l0 - 1]
    rest = np.concatenate([first[:, p.l0 :], t1[:, None] + x[:, p.n0 :]], axis=1)
    rest.sort(axis=1)
    times = np.concatenate([t1[:, None], rest[:, : p.k - p.l0]], axis=1)
    gaps = np.diff(times, axis=1)
    return gaps.mean(axis=0), gaps.std(axis=0) / math.sqrt(reps)


def test_stage1_against_simulation():
    p = plan(14, 10)
    mean, se = stage1_gaps_simulation(p, 1_000_000, 8)
    for r in range(1, K - 10 + 1):
        assert abs(stage1_interservice_mean(r, p) - mean[r - 1]) < 3 * se[r - 1]


def test_no_forking_golden_values():
    p = plan(24, 1)
    assert mean_completion_time(p) == pytest.approx(2.3454949990856573, rel=1e-14)
    assert mean_utilization_cost(p) == pytest.approx(48.0, rel=1e-12)


def test_all_stage0_values():
    p = plan(12, 12)
    assert mean_completion_time(p) == pytest.approx(7.206421356421356, rel=1e-12)
    assert mean_utilization_cost(p) == pytest.approx(36.0, rel=1e-14)


def test_cost_identical_below_k():
    values = {mean_utilization_cost(plan(n0, l0)) for n0 in range(1, K) for l0 in range(1, n0 + 1)}
    assert values == {48.0}


@pytest.mark.parametrize("l0", [1, 6, 12])
def test_full_start_independent_of_threshold(l0):
    assert mean_completion_time(plan(24, l0)) == pytest.approx(C + harmonic(N - K, N) / MU, rel=1e-10)


@pytest.mark.parametrize("n0", [12, 14, 16, 18, 20])
def test_completion_nondecreasing_in_threshold(n0):
    values = [mean_completion_time(plan(n0, l0)) for l0 in range(1, K + 1)]
    assert np.all(np.diff(values) >= -1e-12)


@pytest.mark.parametrize("n0,l0", [(8, 3), (16, 6), (20, 12)])
def test_analytic_matches_monte_carlo(n0, l0):
    p = plan(n0, l0)
    est = single_fork_monte_carlo(p, 200_000, seed=3)
    assert abs(mean_completion_time(p) - est.mean_completion) < 3 * est.se_completion
    assert abs(mean_utilization_cost(p) - est.mean_cost) < 3 * est.se_cost


def test_frontier_contains_no_forking_point():
    rows, pareto = tradeoff_frontier(N, K, C, MU, 1.0, [12, 16, 20, 24], range(1, 13))
    assert any(r.n0 == 24 for r in pareto)
    fastest = min(rows, key=lambda r: r.mean_completion)
    assert fastest in pareto
    for a in pareto:
        assert not any(b.mean_completion < a.mean_completion and b.mean_cost < a.mean_cost for b in rows)


def test_frontier_single_point():
    rows, pareto = tradeoff_frontier(N, K, C, MU, 1.0, [16], [4])
    assert len(rows) == 1 and pareto == rows


def test_frontier_skips_invalid_points():
    rows, _ = tradeoff_frontier(N, K, C, MU, 1.0, [3], range(1, 13))
    assert [r.l0 for r in rows] == [1, 2, 3]


def test_forking_tradeoff_at_twenty_initial_servers():
    rows, _ = tradeoff_frontier(N, K, C, MU, 1.0, [20, 24], range(1, 13))
    base = next(r for r in rows if r.n0 == 24 and r.l0 == 1)
    best = min((r for r in rows if r.n0 == 20), key=lambda r: r.mean_cost)
    cost_drop = 100 * (base.mean_cost - best.mean_cost) / base.mean_cost
    time_rise = 100 * (best.mean_completion - base.mean_completion) / base.mean_completion
    assert cost_drop == pytest.approx(8.3617, abs=0.1)
    assert time_rise == pytest.approx(17.635, abs=0.1)
