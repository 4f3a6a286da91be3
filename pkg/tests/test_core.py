import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ecstore.core import (
    AccessMatrix,
    Cluster,
    CodeSpec,
    Deterministic,
    Exponential,
    FileSpec,
    ParetoScaledExponential,
    Server,
    ShiftedExponential,
    effective_arrival_rates,
    make_service,
    sample_access_set,
    sample_access_sets,
    service_moments,
    uniform_access,
    validate_workload,
)
from ecstore.errors import DomainError, ValidationError


def cluster(m, service=None):
    service = service or Exponential(1.0)
    return Cluster(tuple(Server(f"s{j}", service) for j in range(m)))


def one_file(n, k, placement, lam=0.3):
    return FileSpec("f", lam, CodeSpec(n, k), tuple(placement))


def test_validate_accepts_valid_file():
    wl = validate_workload([one_file(4, 2, ["s0", "s1", "s2", "s3"])], cluster(4))
    assert wl.r == 1 and wl.m == 4
    assert wl.support.all()


def test_validate_rejects_short_placement():
    with pytest.raises(ValidationError, match="placement size != n"):
        validate_workload([one_file(4, 2, ["s0", "s1", "s2"])], cluster(4))


def test_code_rejects_k_above_n():
    with pytest.raises(ValidationError, match="k > n"):
        CodeSpec(4, 5)


def test_validate_lists_every_violation():
    files = [one_file(2, 1, ["s0", "zz"]), one_file(2, 1, ["s0", "s1"])]
    with pytest.raises(ValidationError) as info:
        validate_workload(files, cluster(2))
    text = " ".join(info.value.violations)
    assert "duplicate id" in text and "unknown server id zz" in text


def test_validate_rejects_duplicate_servers():
    c = Cluster((Server("a", Exponential(1.0)), Server("a", Exponential(1.0))))
    with pytest.raises(ValidationError, match="duplicate"):
        validate_workload([], c)


def test_effective_rates_single_file():
    wl = validate_workload([one_file(4, 2, ["s0", "s1", "s2", "s3"])], cluster(4))
    rates = effective_arrival_rates(wl, uniform_access(wl))
    assert rates == pytest.approx({f"s{j}": 0.15 for j in range(4)}, abs=1e-15)


def test_effective_rates_zero_load():
    wl = validate_workload([one_file(4, 2, ["s0", "s1", "s2", "s3"], lam=0.0)], cluster(4))
    assert all(v == 0 for v in effective_arrival_rates(wl, uniform_access(wl)).values())


def test_effective_rates_two_files():
    c = cluster(4)
    files = [
        FileSpec("a", 0.2, CodeSpec(2, 1), ("s0", "s1")),
        FileSpec("b", 0.4, CodeSpec(4, 1), ("s0", "s1", "s2", "s3")),
    ]
    wl = validate_workload(files, c)
    pi = np.array([[0.5, 0.5, 0, 0], [0.25, 0.25, 0.25, 0.25]])
    assert effective_arrival_rates(wl, pi)["s0"] == pytest.approx(0.2, abs=1e-15)


@given(st.floats(0.01, 10.0))
def test_effective_rates_linear_in_lambda(scale):
    c = cluster(3)
    files = [FileSpec("a", 0.3, CodeSpec(3, 2), ("s0", "s1", "s2")), FileSpec("b", 0.7, CodeSpec(2, 1), ("s1", "s2"))]
    wl = validate_workload(files, c)
    doubled = validate_workload([FileSpec(f.id, 2 * f.arrival_rate, f.code, f.placement) for f in files], c)
    pi = uniform_access(wl)
    a = effective_arrival_rates(wl, pi)
    b = effective_arrival_rates(doubled, pi)
    assert all(b[s] == 2 * a[s] for s in a)


def test_access_matrix_rejects_bad_row_sum():
    wl = validate_workload([one_file(4, 2, ["s0", "s1", "s2", "s3"])], cluster(4))
    with pytest.raises(ValidationError, match="row sum"):
        AccessMatrix.for_workload(wl, np.full((1, 4), 0.4))


def test_sampler_degenerate_row():
    rng = np.random.default_rng(1)
    for _ in range(200):
        assert sample_access_set([1, 1, 0, 0], 2, rng) == frozenset({0, 1})


def test_sampler_rejects_infeasible_row():
    with pytest.raises(ValidationError):
        sample_access_set([0.5, 0.5, 0.5], 2, np.random.default_rng(0))


@pytest.mark.parametrize("row,k", [((0.5,) * 4, 2), ((0.9, 0.7, 0.4), 2), ((0.2, 0.3, 0.5, 1.0, 0.0), 2)])
def test_sampler_inclusion_frequencies(row, k):
    draws = 100_000
    sets = sample_access_sets(row, k, np.random.default_rng(7), draws)
    assert sets.shape == (draws, k)
    assert np.all(np.diff(sets, axis=1) > 0)
    freq = np.bincount(sets.ravel(), minlength=len(row)) / draws
    p = np.asarray(row)
    band = 3 * np.sqrt(p * (1 - p) / draws) + 1e-12
    assert np.all(np.abs(freq - p) <= band)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.sampled_from([0.0, 0.25, 0.5, 0.75, 1.0]), min_size=2, max_size=8), st.integers(0, 2**31))
def test_sampler_structure_property(row, seed):
    row = np.array(row)
    k = int(row.sum())
    if k < 1 or row.sum() != k:
        return
    sets = sample_access_sets(row, k, np.random.default_rng(seed), 500)
    assert np.all(np.diff(sets, axis=1) > 0)
    chosen = np.zeros(len(row), dtype=int)
    np.add.at(chosen, sets.ravel(), 1)
    assert np.all(chosen[row == 0] == 0)
    assert np.all(chosen[row == 1] == 500)


def test_single_draw_matches_batch_api():
    rng = np.random.default_rng(3)
    s = sample_access_set((0.9, 0.7, 0.4), 2, rng, server_ids=("a", "b", "c"))
    assert len(s) == 2 and s <= {"a", "b", "c"}


def test_sexp_mgf_and_mean():
    assert ShiftedExponential(0.0, 2.0).mgf(1.0) == pytest.approx(2.0, rel=1e-15)
    assert ShiftedExponential(0.01, 20.0).mean() == pytest.approx(0.06, rel=1e-14)


def test_deterministic_moments():
    d = Deterministic(1.0)
    assert d.mean() == 1.0 and d.variance() == 0.0


def test_mgf_domain_error():
    with pytest.raises(DomainError):
        Exponential(1.0).mgf(1.5)


@pytest.mark.parametrize("bad", [lambda: Exponential(0.0), lambda: ShiftedExponential(-1.0, 1.0), lambda: Deterministic(0.0), lambda: ParetoScaledExponential(2.0, 1.0, 1.0)])
def test_service_invariants(bad):
    with pytest.raises(ValidationError):
        bad()


def test_make_service_round_trip():
    for model in (Exponential(2.0), ShiftedExponential(0.01, 20.0), Deterministic(0.5), ParetoScaledExponential(3.0, 1.0, 2.0)):
        assert make_service(model.family, model.params()) == model
    with pytest.raises(ValidationError, match="unknown service family"):
        make_service("gamma", {})


@pytest.mark.parametrize("model", [Exponential(2.0), ShiftedExponential(0.01, 20.0), Deterministic(0.5), ParetoScaledExponential(6.0, 1.0, 2.0)])
def test_moments_match_monte_carlo(model):
    x = np.asarray(model.sample(np.random.default_rng(11), 1_000_000))
    mom = service_moments(model)
    assert x.mean() == pytest.approx(mom.mean, rel=0.01)
    if mom.variance == 0:
        assert x.var() == pytest.approx(0.0, abs=1e-20)
    else:
        assert x.var() == pytest.approx(mom.variance, rel=0.01)


def test_mgf_near_zero_is_one():
    for model in (Exponential(2.0), ShiftedExponential(0.01, 20.0), Deterministic(0.5)):
        assert model.mgf(1e-9) == pytest.approx(1.0, abs=1e-8)
        assert model.mgf_bound > 0
