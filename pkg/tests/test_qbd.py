import numpy as np
import pytest

from ecstore.errors import SolverError
from ecstore.mg1 import pk_mean_response
from ecstore.qbd import (
    MKMN,
    RESERVATION,
    ChainState,
    _Rules,
    build_mkmn_chain,
    build_reservation_chain,
    max_throughput,
    mean_batches,
    mean_latency,
    mean_latency_from_stationary,
    scalar_blocks,
    solve_qbd,
)
from ecstore.scenario import mds_workload
from ecstore.sim import RESERVATION as SIM_RESERVATION, PolicyConfig, run_scenario
from ecstore.specfun import exp_order_stat_moments

CHAINS = [
    (build_reservation_chain, 2, 2, 0),  # split-merge, stable below lambda = 2/3
    (build_reservation_chain, 5, 2, 1),
    (build_reservation_chain, 5, 2, 2),
    (build_reservation_chain, 10, 5, 2),
    (build_mkmn_chain, 5, 2, 0),
    (build_mkmn_chain, 5, 2, 1),
    (build_mkmn_chain, 6, 3, 2),
]


@pytest.mark.parametrize("builder,n,k,t", CHAINS)
def test_generator_structure(builder, n, k, t):
    blocks = builder(n, k, t, 0.6, 1.0)
    assert blocks.row_sum_error() < 1e-10
    q = blocks.full_generator(levels=4)
    interior = q.shape[0] - blocks.A1.shape[0]
    assert np.abs(q[:interior].sum(axis=1)).max() < 1e-10
    off = q - np.diag(np.diag(q))
    assert off.min() >= 0


@pytest.mark.parametrize("builder,n,k,t", CHAINS)
def test_stationary_distribution(builder, n, k, t):
    blocks = builder(n, k, t, 0.6, 1.0)
    dist = solve_qbd(blocks)
    levels = 10
    parts = [dist.boundary] + [dist.level(j) for j in range(levels)]
    x = np.concatenate(parts)
    assert x.min() >= -1e-12
    assert dist.total() == pytest.approx(1.0, abs=1e-8)
    q = blocks.full_generator(levels=levels)
    resid = x @ q
    # the last truncated level loses its up-moves; check every balance column before it
    keep = q.shape[0] - blocks.A1.shape[0]
    assert np.abs(resid[:keep]).max() < 1e-7


def test_birth_death_is_geometric():
    blocks = scalar_blocks(0.5, 1.0)
    dist = solve_qbd(blocks, tol=1e-14)
    rho = 0.5
    assert dist.boundary[0] == pytest.approx(1 - rho, abs=1e-9)
    for j in range(12):
        assert dist.level(j)[0] == pytest.approx(rho ** (j + 1) * (1 - rho), abs=1e-9)
    assert mean_latency_from_stationary(blocks, dist, 0.5) == pytest.approx(2.0, rel=1e-9)


def test_split_merge_reduction():
    mean, var = exp_order_stat_moments(2, 2, 1.0)
    oracle = pk_mean_response(0.4, mean, variance=var)
    assert oracle == pytest.approx(3.25, abs=1e-12)
    assert mean_latency(RESERVATION, 2, 2, 0, 0.4, 1.0) == pytest.approx(oracle, abs=1e-6)


@pytest.mark.parametrize("n,k,lam", [(3, 3, 0.3), (4, 4, 0.2)])
def test_split_merge_general_sizes(n, k, lam):
    mean, var = exp_order_stat_moments(n, n, 1.0)
    oracle = pk_mean_response(lam, mean, variance=var)
    assert mean_latency(RESERVATION, n, k, 0, lam, 1.0) == pytest.approx(oracle, rel=1e-8)


@pytest.mark.parametrize("builder", [build_reservation_chain, build_mkmn_chain])
def test_zero_load_sits_on_empty_state(builder):
    blocks = builder(5, 2, 1, 0.0, 1.0)
    dist = solve_qbd(blocks)
    empty = blocks.boundary_states.index(ChainState((), 5, 0, 0, (), (0,)))
    assert dist.boundary[empty] == pytest.approx(1.0, abs=1e-12)
    assert dist.total() == pytest.approx(1.0, abs=1e-12)


def test_mkmn_single_chunk_is_erlang_c():
    # M/M/2 with lambda = mu = 1: P(wait) = 1/3, sojourn = 1/3 + 1
    assert mean_latency(MKMN, 2, 1, 0, 1.0, 1.0) == pytest.approx(4 / 3, rel=1e-9)


def test_heavier_load_chain():
    blocks = build_reservation_chain(10, 5, 2, 1.2, 1.0)
    dist = solve_qbd(blocks)
    assert dist.total() == pytest.approx(1.0, abs=1e-8)
    assert np.isfinite(mean_batches(blocks, dist))


def test_reservation_monotone_in_t():
    values = [mean_latency(RESERVATION, 10, 5, t, 1.0, 1.0) for t in (1, 2, 3)]
    assert values[0] >= values[1] >= values[2]


def test_t3_between_mkmn_and_reservation1():
    resv3 = mean_latency(RESERVATION, 10, 5, 3, 1.0, 1.0)
    assert mean_latency(MKMN, 10, 5, 3, 1.0, 1.0) <= resv3 <= mean_latency(RESERVATION, 10, 5, 1, 1.0, 1.0)


def test_max_throughput_bracket():
    value = max_throughput(build_reservation_chain, 10, 5, 2, 1.0)
    assert 1.9 < value <= 2.0001


def test_max_throughput_single_chunk():
    assert max_throughput(build_reservation_chain, 4, 1, 1, 1.0) == pytest.approx(4.0, abs=4e-4)
    assert max_throughput(build_mkmn_chain, 4, 1, 1, 1.0) == pytest.approx(4.0, abs=4e-4)


def test_unstable_chain_raises():
    with pytest.raises(SolverError):
        solve_qbd(build_reservation_chain(4, 2, 1, 2.5, 1.0))
    with pytest.raises(SolverError):
        solve_qbd(build_reservation_chain(2, 2, 0, 0.7, 1.0))


def test_window_example_reservation_one_idles():
    # (5,2): batch 3 has one chunk served by server 2 and one still buffered; batch 4 waits.
    rules = _Rules(5, 2, 1, RESERVATION)
    state = ChainState((1,), 0, 1, 0, (1,), (0, 0))
    moves = {mult: new for mult, new, _ in rules.completions(state)}
    # server 2 finishes its chunk of batch 3 and must go idle
    assert moves[1] == ChainState((1,), 1, 1, 0, (0,), (0, 0))
    # one of the other four finishes and takes batch 3's second chunk; batch 4 enters the window
    assert moves[4] == ChainState((2,), 0, 0, 0, (0,), (0, 0))


def test_window_example_reservation_two_proceeds():
    rules = _Rules(5, 2, 2, RESERVATION)
    state = ChainState((1, 2), 0, 0, 0, (1, 0), (0, 0, 0))
    moves = {mult: new for mult, new, _ in rules.completions(state)}
    # under t=2 server 2 moves on to a chunk of batch 4
    assert moves[1] == ChainState((1, 1), 0, 0, 0, (0, 1), (0, 0, 0))


def test_latency_ordering_against_simulation():
    lam = 1.0
    mk = mean_latency(MKMN, 10, 5, 1, lam, 1.0)
    resv = mean_latency(RESERVATION, 10, 5, 1, lam, 1.0)
    rep = run_scenario(mds_workload(10, 5, lam, 1.0), PolicyConfig(SIM_RESERVATION), jobs=100_000, seed=21)
    assert mk <= rep.mean + rep.ci
    assert rep.mean - rep.ci <= resv
