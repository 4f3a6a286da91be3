"""Stall-duration bounds for video streamed from coded storage.

A video i is cut into L_i segments of tau_i seconds each. A request fetches
one chunk of every segment from each of k_i servers; at server j the L_i
chunks are served back to back, so the request's service time there is the
sum of L_i chunk times. Playback starts at d_s and segment q plays at
T^(q) = max(T^(q-1) + tau, D^(q)). The stall duration is
T^(L) - d_s - (L-1) tau.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import Deterministic, Exponential, ShiftedExponential, Workload, arrival_vector
from .errors import DomainError, InfeasibleTError, InstabilityError
from .search import golden_min

T_EPS = 1e-9
GEOM_TOL = 1e-12


def _pi(pi) -> np.ndarray:
    return getattr(pi, "pi", np.asarray(pi, dtype=float))


def _file_index(workload: Workload, i) -> int:
    if isinstance(i, (int, np.integer)):
        return int(i)
    return workload.file_ids.index(i)


def segment_lengths(workload: Workload) -> np.ndarray:
    return np.array([f.segment_length for f in workload.files], dtype=float)


def log_chunk_mgf(service, t):
    """log E[exp(t X)] for one chunk; nan where the MGF is infinite."""
    t = np.asarray(t, dtype=float)
    with np.errstate(invalid="ignore", divide="ignore"):
        if isinstance(service, ShiftedExponential):
            out = service.shift * t - np.log1p(-t / service.rate)
        elif isinstance(service, Exponential):
            out = -np.log1p(-t / service.rate)
        elif isinstance(service, Deterministic):
            out = service.value * t
        else:
            bound = service.mgf_bound
            safe = np.where(t < bound, t, 0.0)
            out = np.log(service.mgf(safe))
    return np.where(t < service.mgf_bound, out, np.nan)


def video_service_mgf(workload: Workload, pi, j, t):
    """B_j(t) = sum_i (pi_ij lambda_i / Lambda_j) M_j(t)^{L_i}.

    The service time at server j of a request drawn from the arrival mix.
    """
    pi = _pi(pi)
    j = j if isinstance(j, (int, np.integer)) else workload.cluster.index(j)
    lam_j = float(arrival_vector(workload, pi)[j])
    if lam_j <= 0:
        raise DomainError(f"server {workload.cluster.ids[j]}: no arrivals, B_j undefined")
    service = workload.cluster.servers[j].service
    if np.any(np.asarray(t) >= service.mgf_bound):
        raise InfeasibleTError(f"t={t} outside the chunk MGF domain t < {service.mgf_bound}", workload.cluster.ids[j])
    logm = log_chunk_mgf(service, t)
    weights = workload.lam * pi[:, j] / lam_j
    vals = np.exp(np.multiply.outer(logm, workload.segments.astype(float)))
    out = vals @ weights
    return float(out) if np.ndim(out) == 0 else out


def video_rho(workload: Workload, pi, j=None):
    """rho_j = sum_i pi_ij lambda_i L_i E[X_j]; all servers when j is None."""
    pi = _pi(pi)
    rho = ((workload.lam * workload.segments) @ pi) * workload.cluster.means()
    if j is None:
        return rho
    j = j if isinstance(j, (int, np.integer)) else workload.cluster.index(j)
    return float(rho[j])


@dataclass
class VideoState:
    """Per-server rates that depend on pi only."""

    lam: np.ndarray
    rho: np.ndarray

    @classmethod
    def build(cls, workload: Workload, pi) -> "VideoState":
        pi = _pi(pi)
        rho = video_rho(workload, pi)
        for j, r in enumerate(rho):
            if r >= 1.0:
                raise InstabilityError(f"server {workload.cluster.ids[j]}: video utilization {r:.6g} >= 1", float(r))
        return cls(arrival_vector(workload, pi), rho)


def log_mgf_matrix(workload: Workload, t) -> np.ndarray:
    """logM[a, j] = log M_j(t_a) for a vector of t values."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    return np.stack([log_chunk_mgf(s.service, t) for s in workload.cluster.servers], axis=1)


def denominator_matrix(workload: Workload, pi, logm: np.ndarray, t) -> np.ndarray:
    """D[a, j] = t_a - sum_f pi_fj lambda_f (M_j(t_a)^{L_f} - 1) = t - Lambda_j (B_j(t) - 1)."""
    pi = _pi(pi)
    t = np.atleast_1d(np.asarray(t, dtype=float))
    w = workload.lam[:, None] * pi
    # overflow to inf marks t as infeasible, which callers test for
    with np.errstate(over="ignore"):
        growth = np.expm1(workload.segments[None, :, None] * logm[:, None, :])
    return t[:, None] - np.einsum("afj,fj->aj", growth, w)


def server_t_sup(workload: Workload, pi, j, state: VideoState = None, tol: float = 1e-13) -> float:
    """Supremum of t with D_j(t) > 0 and t below the chunk MGF bound.

    D_j is concave with D_j(0) = 0 and slope 1 - rho_j > 0 at zero, so the
    feasible set is an interval (0, t_j) found by bisection.
    """
    pi = _pi(pi)
    state = state or VideoState.build(workload, pi)
    service = workload.cluster.servers[j].service
    bound = service.mgf_bound
    if bound <= 0:
        return 0.0

    def positive(x):
        logm = log_mgf_matrix(workload, x)
        if not np.isfinite(logm[0, j]):
            return False
        return denominator_matrix(workload, pi, logm, x)[0, j] > 0

    if state.lam[j] == 0:
        return float(bound)
    lo = 0.0
    if math.isinf(bound):
        hi = 1.0
        while positive(hi):
            lo, hi = hi, 2.0 * hi
    else:
        hi = float(bound)
    for _ in range(300):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if positive(mid):
            lo = mid
        else:
            hi = mid
        if hi - lo < tol * max(1.0, hi):
            break
    return lo


def file_t_interval(workload: Workload, pi, i, state: VideoState = None):
    """Feasible t interval for file i: intersection over the servers it uses."""
    pi = _pi(pi)
    i = _file_index(workload, i)
    state = state or VideoState.build(workload, pi)
    used = np.nonzero(pi[i] > 0)[0]
    hi = min(server_t_sup(workload, pi, j, state) for j in used) * (1.0 - 1e-9)
    if hi <= T_EPS:
        raise InfeasibleTError(f"file {workload.file_ids[i]}: empty feasible t interval")
    return T_EPS, hi


def segment_mgf(workload: Workload, pi, i, j, ell: int, t: float, state: VideoState = None) -> float:
    """Z^(ell)_ij(t) = (1 - rho_j) t M_j(t)^ell / (t - Lambda_j (B_j(t) - 1)).

    The MGF of the download finish time of segment ell at server j.
    """
    pi = _pi(pi)
    state = state or VideoState.build(workload, pi)
    logm = log_mgf_matrix(workload, t)
    d = denominator_matrix(workload, pi, logm, t)[0, j]
    _require_feasible(workload, j, t, logm[0, j], d)
    return (1.0 - state.rho[j]) * t * math.exp(ell * logm[0, j]) / d


def _require_feasible(workload, j, t, logm, d):
    if not (t > 0 and np.isfinite(logm) and d > 0):
        raise InfeasibleTError(
            f"t={t:.6g} infeasible at server {workload.cluster.ids[j]}: need t < chunk MGF bound and t > Lambda_j (B_j(t) - 1)",
            workload.cluster.ids[j],
        )


def geometric_sum(log_ratio, L):
    """sum_{l=1}^{L} x^l for x = exp(log_ratio), via expm1; direct sum near x = 1."""
    u = np.asarray(log_ratio, dtype=float)
    L = np.asarray(L, dtype=float)
    with np.errstate(all="ignore"):
        closed = np.exp(u) * np.expm1(L * u) / np.expm1(u)
    near = np.abs(u) < GEOM_TOL
    if np.any(near):
        # removable singularity: sum_{l} e^{l u} to first order in u
        direct = L + u * L * (L + 1) / 2.0
        closed = np.where(near, direct, closed)
    return closed


def h_ij(workload: Workload, pi, i, j, t: float, d_s: float, state: VideoState = None, direct: bool = False) -> float:
    """H_ij = sum_{l=1}^{L_i} e^{-t (d_s + (l-1) tau)} Z^(l)_ij(t), in closed geometric form.

    With direct=True the L_i terms are summed one by one.
    """
    pi = _pi(pi)
    i = _file_index(workload, i)
    state = state or VideoState.build(workload, pi)
    tau = workload.files[i].segment_length
    L = int(workload.segments[i])
    logm = log_mgf_matrix(workload, t)
    d = denominator_matrix(workload, pi, logm, t)[0, j]
    _require_feasible(workload, j, t, logm[0, j], d)
    lead = (1.0 - state.rho[j]) * t / d
    if direct:
        return float(sum(math.exp(-t * (d_s + (ell - 1) * tau) + ell * logm[0, j]) * lead for ell in range(1, L + 1)))
    u = logm[0, j] - t * tau
    return float(math.exp(-t * (d_s - tau)) * lead * geometric_sum(u, L))


def h_matrix(workload: Workload, pi, t, d_s: float, state: VideoState = None):
    """H[i, j] for every file at its own t_i; returns (H, feasible mask, logM, D).

    Entries where the conditions fail are inf.
    """
    pi = _pi(pi)
    state = state or VideoState.build(workload, pi)
    t = np.broadcast_to(np.asarray(t, dtype=float), (workload.r,))
    tau = segment_lengths(workload)
    logm = log_mgf_matrix(workload, t)
    d = denominator_matrix(workload, pi, logm, t)
    ok = np.isfinite(logm) & (d > 0) & (t[:, None] > 0)
    with np.errstate(all="ignore"):
        lead = (1.0 - state.rho)[None, :] * t[:, None] / d
        u = logm - (t * tau)[:, None]
        g = geometric_sum(u, workload.segments[:, None])
        h = np.exp(-t * (d_s - tau))[:, None] * lead * g
    return np.where(ok, h, np.inf), ok, logm, d


def mean_stall_bound(workload: Workload, pi, i, t: float, d_s: float, state: VideoState = None) -> float:
    """(1/t) log sum_j pi_ij (1 + H_ij), an upper bound on the mean stall duration."""
    pi = _pi(pi)
    i = _file_index(workload, i)
    state = state or VideoState.build(workload, pi)
    used = np.nonzero(pi[i] > 0)[0]
    total = sum(pi[i, j] * (1.0 + h_ij(workload, pi, i, j, t, d_s, state)) for j in used)
    return math.log(total) / t


class StallTail(float):
    """Tail bound value with the unclamped sum attached."""

    def __new__(cls, value, raw, t):
        obj = super().__new__(cls, value)
        obj.raw = raw
        obj.t = t
        return obj


def stall_tail_bound(workload: Workload, pi, i, x: float, t: float, d_s: float, state: VideoState = None) -> StallTail:
    """min(1, sum_j pi_ij e^{-t x} (1 + H_ij)), a bound on P(stall >= x)."""
    pi = _pi(pi)
    i = _file_index(workload, i)
    state = state or VideoState.build(workload, pi)
    used = np.nonzero(pi[i] > 0)[0]
    raw = math.exp(-t * x) * sum(pi[i, j] * (1.0 + h_ij(workload, pi, i, j, t, d_s, state)) for j in used)
    return StallTail(min(1.0, raw), raw, t)


def _search_t(f, lo, hi):
    """Log-spaced scan followed by golden-section refinement around the best probe."""
    grid = np.geomspace(lo, hi, 48)
    vals = []
    for x in grid:
        try:
            v = f(x)
        except (ArithmeticError, ValueError):
            v = math.inf
        vals.append(v if math.isfinite(v) else math.inf)
    b = int(np.argmin(vals))
    a_lo = grid[max(b - 1, 0)]
    a_hi = grid[min(b + 1, len(grid) - 1)]
    x, v = golden_min(f, a_lo, a_hi, tol=1e-10)
    if vals[b] < v:
        return float(grid[b]), vals[b]
    return x, v


def optimize_mean_t(workload: Workload, pi, i, d_s: float, state: VideoState = None):
    """(t*, bound*) minimizing mean_stall_bound over the feasible t interval."""
    pi = _pi(pi)
    state = state or VideoState.build(workload, pi)
    lo, hi = file_t_interval(workload, pi, i, state)
    return _search_t(lambda t: mean_stall_bound(workload, pi, i, t, d_s, state), lo, hi)


def optimize_tail_t(workload: Workload, pi, i, x: float, d_s: float, state: VideoState = None):
    """(t*, bound*) minimizing the unclamped tail sum; the returned bound is clamped."""
    pi = _pi(pi)
    state = state or VideoState.build(workload, pi)
    lo, hi = file_t_interval(workload, pi, i, state)
    t, _ = _search_t(lambda t: math.log(stall_tail_bound(workload, pi, i, x, t, d_s, state).raw), lo, hi)
    return t, stall_tail_bound(workload, pi, i, x, t, d_s, state)


def play_time_stall(download_times, d_s: float, tau: float):
    """Stall duration from per-segment download finish times.

    T1 = max(d_s, D1), Tq = max(T(q-1) + tau, Dq), stall = TL - d_s - (L-1) tau.
    Accepts a 1-D sequence or a 2-D array with one request per row.
    """
    d = np.asarray(download_times, dtype=float)
    if d.shape[-1] < 1:
        raise ValueError("need at least one segment")
    play = np.maximum(d_s, d[..., 0])
    for q in range(1, d.shape[-1]):
        play = np.maximum(play + tau, d[..., q])
    stall = play - d_s - (d.shape[-1] - 1) * tau
    stall = np.maximum(stall, 0.0)
    return float(stall) if stall.ndim == 0 else stall
