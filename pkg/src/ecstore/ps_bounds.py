"""Latency bounds for probabilistic scheduling.

Each request of file i sends its k_i chunk requests to a random k_i-subset of
servers, server j being included with probability pi[i, j]. Every server is
then an M/G/1 queue with arrival rate Lambda_j = sum_i lambda_i pi[i, j].
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .core import Workload, arrival_vector
from .errors import InfeasibleTError, InstabilityError
from .mg1 import Mg1Input, feasible_t_sup as _mg1_t_sup, mgf_remainder, waiting_moments
from .search import golden_min, ternary_min
from .specfun import lower_incomplete_gamma

T_EPS = 1e-8


class ServerLoad(NamedTuple):
    server: str
    arrival_rate: float
    utilization: float
    stable: bool


def _pi(pi) -> np.ndarray:
    return getattr(pi, "pi", np.asarray(pi, dtype=float))


def _file_index(workload: Workload, i) -> int:
    if isinstance(i, (int, np.integer)):
        return int(i)
    return workload.file_ids.index(i)


def server_utilization(workload: Workload, pi, video: bool = False) -> np.ndarray:
    """rho_j = Lambda_j E[S_j]; with video=True every request brings L_i chunks to the server."""
    pi = _pi(pi)
    weights = workload.lam * (workload.segments if video else 1)
    return (weights @ pi) * workload.cluster.means()


def stability_check(workload: Workload, pi, video: bool = False):
    """Per-server (Lambda_j, rho_j, stable?) and an overall flag."""
    pi = _pi(pi)
    lam = arrival_vector(workload, pi)
    rho = server_utilization(workload, pi, video)
    rows = [ServerLoad(sid, float(l), float(r), bool(r < 1.0)) for sid, l, r in zip(workload.cluster.ids, lam, rho)]
    return rows, all(r.stable for r in rows)


def feasible_t_sup(service, lam: float) -> float:
    """Supremum of feasible t for one server fed at rate lam."""
    return _mg1_t_sup(service, lam)


def sojourn_mgf_minus_one(service, lam: float, rho: float, t):
    """Q(t) - 1 for the M/G/1 sojourn MGF Q(t) = (1-rho) t Z(t) / (t - lam (Z(t)-1)).

    Uses W(t) - 1 = lam R(t) / (t (1-rho) - lam R(t)) with R(t) = Z(t) - 1 - t E[S]
    so the value stays accurate as t approaches zero. No feasibility checks.
    """
    t = np.asarray(t, dtype=float)
    r = mgf_remainder(service, t)
    zm1 = service.mgf_minus_one(t)
    wm1 = lam * r / (t * (1.0 - rho) - lam * r)
    return wm1 * (1.0 + zm1) + zm1


@dataclass
class ServerState:
    """Per-server quantities that depend on pi but not on t."""

    lam: np.ndarray
    rho: np.ndarray
    tmax: np.ndarray

    @classmethod
    def build(cls, workload: Workload, pi) -> "ServerState":
        pi = _pi(pi)
        lam = arrival_vector(workload, pi)
        rho = lam * workload.cluster.means()
        tmax = np.empty_like(lam)
        for j, s in enumerate(workload.cluster.servers):
            if rho[j] >= 1.0:
                raise InstabilityError(f"server {s.id}: utilization {rho[j]:.6g} >= 1", float(rho[j]))
            tmax[j] = _mg1_t_sup(s.service, float(lam[j]))
        return cls(lam, rho, tmax)


def _check_t(workload, row, state, t):
    used = np.nonzero(row > 0)[0]
    for j in used:
        if not 0 < t < state.tmax[j]:
            raise InfeasibleTError(
                f"t={t:.6g} infeasible at server {workload.cluster.ids[j]} (t_max={state.tmax[j]:.6g})",
                server=workload.cluster.ids[j],
            )
    return used


def _log_mgf_sum(workload, row, state, t, used):
    """log sum_j pi_j Q_j(t), accumulated as log1p of the excess over one."""
    excess = row[used].sum() - 1.0
    for j in used:
        s = workload.cluster.servers[j].service
        excess += row[j] * float(sojourn_mgf_minus_one(s, state.lam[j], state.rho[j], t))
    return math.log1p(excess)


def mean_latency_bound_mgf(workload: Workload, pi, i, t: float, state: ServerState = None) -> float:
    """(1/t) log sum_j pi[i,j] (1-rho_j) t Z_j(t) / (t - Lambda_j (Z_j(t) - 1))."""
    pi = _pi(pi)
    i = _file_index(workload, i)
    state = state or ServerState.build(workload, pi)
    row = pi[i]
    used = _check_t(workload, row, state, t)
    return _log_mgf_sum(workload, row, state, t, used) / t


def t_interval(workload: Workload, pi, i, state: ServerState = None):
    """Open interval of feasible t for file i, shrunk by T_EPS at both ends."""
    pi = _pi(pi)
    i = _file_index(workload, i)
    state = state or ServerState.build(workload, pi)
    used = np.nonzero(pi[i] > 0)[0]
    hi = float(state.tmax[used].min()) - T_EPS
    if hi <= T_EPS:
        raise InfeasibleTError(f"file {workload.file_ids[i]}: empty feasible t interval")
    return T_EPS, hi


def optimize_t(workload: Workload, pi, i, state: ServerState = None):
    """Golden-section search for the t minimizing the MGF mean bound; returns (t*, bound*)."""
    pi = _pi(pi)
    state = state or ServerState.build(workload, pi)
    lo, hi = t_interval(workload, pi, i, state)
    return golden_min(lambda t: mean_latency_bound_mgf(workload, pi, i, t, state), lo, hi, tol=1e-12)


def _sojourn_moments(workload: Workload, state: ServerState, j: int):
    s = workload.cluster.servers[j].service
    return waiting_moments(Mg1Input(float(state.lam[j]), s), sojourn=True)


def mean_latency_bound_moment(workload: Workload, pi, i, z: float = None, state: ServerState = None):
    """z + 1/2 sum_j pi[i,j] [(E_j - z) + sqrt((E_j - z)^2 + Var_j)] over sojourn moments.

    When z is None it is chosen by ternary search (the expression is convex
    in z). Returns (bound, z).
    """
    pi = _pi(pi)
    i = _file_index(workload, i)
    state = state or ServerState.build(workload, pi)
    row = pi[i]
    used = np.nonzero(row > 0)[0]
    moments = np.array([_sojourn_moments(workload, state, j) for j in used])
    means, variances = moments[:, 0], moments[:, 1]
    weights = row[used]

    def f(zz):
        d = means - zz
        return zz + 0.5 * float((weights * (d + np.sqrt(d * d + variances))).sum())

    if z is None:
        hi = float((means + 3.0 * np.sqrt(variances)).max())
        z, val = ternary_min(f, 0.0, hi)
        return val, z
    return f(z), z


class TailBound(NamedTuple):
    value: float
    raw: float
    clamped: bool
    t: np.ndarray


def _tail_term(workload, state, j, sigma, t):
    s = workload.cluster.servers[j].service
    q = 1.0 + float(sojourn_mgf_minus_one(s, state.lam[j], state.rho[j], t))
    return -t * sigma + math.log(q)


def tail_probability_bound(workload: Workload, pi, i, sigma: float, t=None, state: ServerState = None) -> TailBound:
    """Chernoff bound on P(latency >= sigma) with a separate t per server.

    sum_j pi[i,j] e^{-t_j sigma} Q_j(t_j), clamped to 1. When t is None each
    t_j is chosen by golden-section search on the log of its own term.
    """
    pi = _pi(pi)
    i = _file_index(workload, i)
    state = state or ServerState.build(workload, pi)
    row = pi[i]
    used = np.nonzero(row > 0)[0]
    ts = np.zeros(workload.m)
    total = 0.0
    for j in used:
        if t is None:
            tj, logv = golden_min(lambda x: _tail_term(workload, state, j, sigma, x), T_EPS, state.tmax[j] - T_EPS, tol=1e-12)
        else:
            tj = float(np.broadcast_to(t, (workload.m,))[j])
            if not 0 < tj < state.tmax[j]:
                raise InfeasibleTError(f"t={tj:.6g} infeasible at server {workload.cluster.ids[j]}", workload.cluster.ids[j])
            logv = _tail_term(workload, state, j, sigma, tj)
        ts[j] = tj
        total += row[j] * math.exp(logv)
    return TailBound(float(min(1.0, total)), float(total), bool(total > 1.0), ts)


def independence_upper_ccdf(tau, n: int, k: int, lam_task: float, mu: float):
    """1 - (1 - e^{-(mu - lam) tau})^k: k independent M/M/1 sojourn times must all finish by tau."""
    if lam_task >= mu:
        raise InstabilityError(f"per-queue load {lam_task / mu:.6g} >= 1", lam_task / mu)
    tau = np.asarray(tau, dtype=float)
    f = -np.expm1(-(mu - lam_task) * tau)
    out = -np.expm1(k * np.log(np.where(f > 0, f, 1.0)))
    out = np.where(f > 0, out, 1.0)
    return float(out) if out.ndim == 0 else out


def heavy_tail_waiting_ccdf(x: float, lam: float, rho: float, x_m: float, alpha: float, mu: float) -> float:
    """P(W > x) ~ Lambda/(1-rho) x^{1-alpha}/(alpha-1) V(x), V(x) = alpha (x_m/mu)^alpha gamma(alpha, mu x / x_m)."""
    if alpha <= 2:
        raise ValueError("shape alpha must exceed 2")
    if rho >= 1:
        raise InstabilityError(f"utilization {rho:.6g} >= 1", rho)
    if lam == 0:
        return 0.0
    v = alpha * (x_m / mu) ** alpha * lower_incomplete_gamma(alpha, mu * x / x_m)
    return lam / (1.0 - rho) * x ** (1.0 - alpha) / (alpha - 1.0) * v
