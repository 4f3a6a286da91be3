import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ecstore.core import Cluster, CodeSpec, Exponential, FileSpec, Server, ShiftedExponential, uniform_access, validate_workload
from ecstore.errors import DomainError, InfeasibleTError, InstabilityError
from ecstore.mg1 import Mg1Input, utilization
from ecstore.ps_bounds import mean_latency_bound_mgf
from ecstore.sim import video_replay
from ecstore.video import (
    VideoState,
    file_t_interval,
    geometric_sum,
    h_ij,
    mean_stall_bound,
    optimize_mean_t,
    play_time_stall,
    segment_mgf,
    stall_tail_bound,
    video_rho,
    video_service_mgf,
)


def video_setup(segments, rates, tau=4.0, m=3, k=2, service=None):
    service = service or ShiftedExponential(0.01, 20.0)
    cluster = Cluster(tuple(Server(f"s{j}", service) for j in range(m)))
    files = [FileSpec(f"v{i}", lam, CodeSpec(m, k), cluster.ids, L, tau) for i, (L, lam) in enumerate(zip(segments, rates))]
    wl = validate_workload(files, cluster)
    return wl, uniform_access(wl)


def test_service_mgf_examples():
    wl, pi = video_setup([1], [0.5])
    s = wl.cluster.servers[0].service
    assert video_service_mgf(wl, pi, 0, 2.0) == pytest.approx(s.mgf(2.0), rel=1e-14)
    assert video_service_mgf(wl, pi, 0, 0.0) == pytest.approx(1.0, rel=1e-15)
    wl, pi = video_setup([2, 3], [0.1, 0.1], service=Exponential(2.0))
    expected = 0.5 * (4 / 3) ** 2 + 0.5 * (4 / 3) ** 3
    assert video_service_mgf(wl, pi, 0, 0.5) == pytest.approx(expected, rel=1e-14)
    assert expected == pytest.approx(2.0741, abs=5e-5)


def test_service_mgf_errors():
    wl, pi = video_setup([1], [0.0])
    with pytest.raises(DomainError):
        video_service_mgf(wl, pi, 0, 0.1)
    wl, pi = video_setup([1], [0.5], service=Exponential(2.0))
    with pytest.raises(InfeasibleTError):
        video_service_mgf(wl, pi, 0, 2.0)


def test_rho_examples():
    wl, pi = video_setup([5], [0.0])
    assert np.all(video_rho(wl, pi) == 0)
    wl, pi = video_setup([1], [3.0])
    lam_j = 3.0 * 2 / 3
    assert video_rho(wl, pi, 0) == pytest.approx(utilization(Mg1Input(lam_j, wl.cluster.servers[0].service)), rel=1e-14)


def test_rho_arithmetic():
    wl, pi = video_setup([4, 7], [0.1, 0.05], m=4, k=2)
    mean = 0.01 + 1 / 20.0
    expected = (0.1 * 4 + 0.05 * 7) * 0.5 * mean
    assert np.allclose(video_rho(wl, pi), expected, rtol=1e-14)


def test_unstable_state_raises():
    wl, pi = video_setup([100], [0.5])
    with pytest.raises(InstabilityError):
        VideoState.build(wl, pi)


@settings(max_examples=40, deadline=None)
@given(st.sampled_from([1, 5, 50]), st.floats(0.0005, 0.02), st.floats(0.5, 8.0), st.floats(0.0, 30.0), st.floats(0.05, 0.95))
def test_h_closed_form_equals_direct_sum(L, lam, tau, d_s, frac):
    wl, pi = video_setup([L], [lam], tau=tau)
    lo, hi = file_t_interval(wl, pi, 0)
    t = lo + frac * (hi - lo)
    closed = h_ij(wl, pi, 0, 1, t, d_s)
    direct = h_ij(wl, pi, 0, 1, t, d_s, direct=True)
    assert closed == pytest.approx(direct, rel=1e-10)


def test_h_single_segment():
    wl, pi = video_setup([1], [0.5])
    t, d_s = 3.0, 2.5
    assert h_ij(wl, pi, 0, 0, t, d_s) == pytest.approx(math.exp(-t * d_s) * segment_mgf(wl, pi, 0, 0, 1, t), rel=1e-14)


def test_geometric_sum_removable_singularity():
    for L in (1, 5, 50):
        assert geometric_sum(0.0, L) == L
        assert geometric_sum(1e-13, L) == pytest.approx(L, rel=1e-10)
        assert geometric_sum(2e-12, L) == pytest.approx(sum(math.exp(2e-12 * l) for l in range(1, L + 1)), rel=1e-12)


def test_h_infeasible_t():
    wl, pi = video_setup([3], [0.01])
    with pytest.raises(InfeasibleTError):
        h_ij(wl, pi, 0, 0, 25.0, 1.0)


def test_mean_bound_decreasing_in_startup_delay():
    wl, pi = video_setup([10], [0.01])
    values = [optimize_mean_t(wl, pi, 0, d)[1] for d in np.linspace(0.0, 60.0, 13)]
    assert all(v >= 0 for v in values)
    assert np.all(np.diff(values) <= 1e-12)


def test_single_segment_relates_to_latency_bound():
    # rows of pi sum to k, so exp(t * stall) = k + exp(t * latency)
    wl, pi = video_setup([1], [5.0], tau=0.0)
    t = 3.0
    stall = mean_stall_bound(wl, pi, 0, t, 0.0)
    lat = mean_latency_bound_mgf(wl, pi, 0, t)
    assert math.exp(t * stall) == pytest.approx(2 + math.exp(t * lat), rel=1e-12)
    assert stall == pytest.approx(0.5041970774435368, rel=1e-12)


def test_tail_bound_examples():
    wl, pi = video_setup([10], [0.01])
    t, _ = optimize_mean_t(wl, pi, 0, 4.0)
    assert stall_tail_bound(wl, pi, 0, 0.0, t, 4.0) == 1.0
    values = [stall_tail_bound(wl, pi, 0, x, t, 4.0) for x in np.geomspace(0.1, 100.0, 25)]
    assert all(0 <= v <= 1 for v in values)
    assert np.all(np.diff(values) <= 0)
    assert values[-1] < 1e-3


def test_play_time_examples():
    assert play_time_stall([3.0, 20.0], 5.0, 4.0) == 11.0
    assert play_time_stall([1.0, 5.0, 9.0], 2.0, 4.0) == 0.0
    assert play_time_stall([7.0], 2.0, 4.0) == 5.0
    with pytest.raises(ValueError):
        play_time_stall([], 1.0, 1.0)


def max_form_stall(d, d_s, tau):
    L = len(d)
    end = max([d_s + (L - 1) * tau] + [d[z] + (L - 1 - z) * tau for z in range(L)])
    return end - d_s - (L - 1) * tau


def test_play_time_matches_max_form():
    rng = np.random.default_rng(6)
    for _ in range(1000):
        L = int(rng.integers(1, 30))
        d = np.sort(rng.exponential(10.0, L)) if rng.random() < 0.5 else rng.exponential(10.0, L)
        d_s, tau = float(rng.uniform(0, 20)), float(rng.uniform(0.5, 6))
        assert play_time_stall(d, d_s, tau) == pytest.approx(max_form_stall(d, d_s, tau), abs=1e-9)


def test_play_time_batched_rows():
    rng = np.random.default_rng(1)
    d = rng.exponential(5.0, (50, 8))
    batch = play_time_stall(d, 3.0, 2.0)
    assert np.array_equal(batch, [play_time_stall(row, 3.0, 2.0) for row in d])


@given(st.lists(st.floats(0.0, 100.0), min_size=1, max_size=20), st.floats(0.0, 50.0), st.floats(0.0, 50.0), st.floats(0.1, 10.0))
def test_play_time_nonnegative_and_monotone(d, a, b, tau):
    lo, hi = sorted((a, b))
    s_lo, s_hi = play_time_stall(d, lo, tau), play_time_stall(d, hi, tau)
    assert s_lo >= 0 and s_hi >= 0
    assert s_hi <= s_lo + 1e-9


def test_small_scenario_bound_above_simulation():
    wl, pi = video_setup([8, 15, 25], [0.01, 0.01, 0.005], tau=2.0, m=6, k=3)
    rep = video_replay(wl, pi, 4.0, 50_000, seed=5)
    for i in range(wl.r):
        _, bound = optimize_mean_t(wl, pi, i, 4.0)
        assert bound >= rep.per_file_mean[i] - rep.per_file_ci[i]
