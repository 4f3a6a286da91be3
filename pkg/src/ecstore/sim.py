"""Discrete-event simulation of coded storage under each scheduling policy.

Random streams are counter-based (Philox) and keyed by (seed ^ replication,
stream id): stream 0 drives arrivals, stream 1 access-set sampling and
stream 2 + j the service times of server j. Service times are drawn from a
server's stream in fixed blocks, in the order the server starts jobs, so
runs are bit-for-bit reproducible.
"""

from __future__ import annotations

import heapq
import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import stats

from .core import Workload, sample_access_sets
from .errors import DomainError, ValidationError
from .relaunch import ForkPlan
from .video import play_time_stall

Z99 = 2.5758293035489004
BLOCK = 1024
UTIL_WARN = 0.999

FORK_JOIN = "fork_join"
PROBABILISTIC = "probabilistic"
RESERVATION = "mds_reservation"
MKMN = "mkmn"
FLOOD = "redundant_flood"
SINGLE_FORK = "delayed_single_fork"
VIDEO = "video_probabilistic"
POLICY_KINDS = (FORK_JOIN, PROBABILISTIC, RESERVATION, MKMN, FLOOD, SINGLE_FORK, VIDEO)


@dataclass(frozen=True)
class PolicyConfig:
    """Scheduling policy and its parameters.

    pi: access matrix (probabilistic kinds); t: reservation level (None means
    unlimited); v: jobs sent per request (redundant flood); n0, l0: single
    fork levels; d_s: startup delay (video). abort_running: whether fork-join
    cancellation also stops copies already in service (queued copies are
    always dropped).
    """

    kind: str
    pi: object = None
    t: int = None
    v: int = None
    n0: int = None
    l0: int = None
    d_s: float = 0.0
    abort_running: bool = True

    def __post_init__(self):
        if self.kind not in POLICY_KINDS:
            raise ValidationError([f"unknown policy kind {self.kind!r}"])
        if self.kind in (PROBABILISTIC, VIDEO) and self.pi is None:
            raise ValidationError([f"{self.kind} needs an access matrix pi"])
        if self.kind in (RESERVATION, MKMN) and self.t is not None and self.t < 0:
            raise ValidationError(["reservation level t must be >= 0"])
        if self.kind == SINGLE_FORK and (self.n0 is None or self.l0 is None):
            raise ValidationError(["delayed single fork needs n0 and l0"])

    def label(self) -> str:
        if self.kind in (RESERVATION, MKMN):
            return f"{self.kind}(t={'inf' if self.t is None else self.t})"
        if self.kind == FLOOD:
            return f"{self.kind}(v={self.v})"
        if self.kind == SINGLE_FORK:
            return f"{self.kind}(n0={self.n0},l0={self.l0})"
        if self.kind == FORK_JOIN and not self.abort_running:
            return f"{self.kind}(abort_running=false)"
        return self.kind


@dataclass
class SimReport:
    policy: str
    mean: float
    ci: float
    per_file_mean: np.ndarray
    per_file_ci: np.ndarray
    thresholds: tuple
    ccdf: np.ndarray
    ccdf_lo: np.ndarray
    ccdf_hi: np.ndarray
    utilization: np.ndarray
    jobs_completed: int
    warnings: list = field(default_factory=list)
    samples: np.ndarray = field(default=None, repr=False)
    sample_files: np.ndarray = field(default=None, repr=False)


# ---------------------------------------------------------------- random streams


def stream(seed: int, rep: int, stream_id: int) -> np.random.Generator:
    """Independent Philox generator for (seed, replication, stream id)."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed) ^ int(rep), int(stream_id)])))


class ServiceStream:
    """Service times of one server, drawn from its own stream in blocks of BLOCK."""

    def __init__(self, service, rng: np.random.Generator):
        self.service = service
        self.rng = rng
        self.buf = np.empty(0)
        self.pos = 0

    def _refill(self):
        self.buf = np.asarray(self.service.sample(self.rng, BLOCK), dtype=float)
        self.pos = 0

    def next(self) -> float:
        if self.pos >= len(self.buf):
            self._refill()
        x = self.buf[self.pos]
        self.pos += 1
        return float(x)

    def take(self, count: int) -> np.ndarray:
        out = np.empty(count)
        filled = 0
        while filled < count:
            if self.pos >= len(self.buf):
                self._refill()
            step = min(count - filled, len(self.buf) - self.pos)
            out[filled:filled + step] = self.buf[self.pos:self.pos + step]
            self.pos += step
            filled += step
        return out


def _service_streams(workload: Workload, seed: int, rep: int):
    return [ServiceStream(s.service, stream(seed, rep, 2 + j)) for j, s in enumerate(workload.cluster.servers)]


def _arrivals(workload: Workload, jobs: int, seed: int, rep: int):
    """Poisson arrival times and file indices for `jobs` requests."""
    total = float(workload.lam.sum())
    if total <= 0:
        raise DomainError("total arrival rate must be > 0 to simulate")
    rng = stream(seed, rep, 0)
    times = np.cumsum(rng.exponential(1.0 / total, jobs))
    if workload.r == 1:
        files = np.zeros(jobs, dtype=int)
    else:
        files = rng.choice(workload.r, size=jobs, p=workload.lam / total)
    return times, files


# ---------------------------------------------------------------- statistics


def mean_ci(samples) -> tuple:
    """Sample mean and 99% half-width from 32 batch means (plain t interval when short)."""
    x = np.asarray(samples, dtype=float)
    n = len(x)
    if n == 0:
        return math.nan, math.nan
    mean = float(x.mean())
    if n < 2:
        return mean, math.inf
    if n < 64:
        return mean, float(stats.t.ppf(0.995, n - 1) * x.std(ddof=1) / math.sqrt(n))
    batches = 32
    size = n // batches
    means = x[: size * batches].reshape(batches, size).mean(axis=1)
    half = float(stats.t.ppf(0.995, batches - 1) * means.std(ddof=1) / math.sqrt(batches))
    return mean, half


def empirical_ccdf(samples, thresholds):
    """Fraction of samples >= each threshold with 99% Wilson score intervals."""
    x = np.asarray(samples, dtype=float)
    if x.size == 0:
        raise ValueError("need at least one sample")
    th = np.atleast_1d(np.asarray(thresholds, dtype=float))
    x_sorted = np.sort(x)
    n = x.size
    count = n - np.searchsorted(x_sorted, th, side="left")
    p = count / n
    z2 = Z99 * Z99
    centre = (p + z2 / (2 * n)) / (1 + z2 / n)
    half = Z99 * np.sqrt(p * (1 - p) / n + z2 / (4 * n * n)) / (1 + z2 / n)
    return p, np.maximum(centre - half, 0.0), np.minimum(centre + half, 1.0)


def _report(policy_label, workload, latency, files, warmup, thresholds, busy, horizon) -> SimReport:
    keep = slice(warmup, None)
    samples = latency[keep]
    sfiles = files[keep]
    mean, ci = mean_ci(samples)
    per_mean = np.full(workload.r, math.nan)
    per_ci = np.full(workload.r, math.nan)
    for i in range(workload.r):
        sel = samples[sfiles == i]
        if sel.size:
            per_mean[i], per_ci[i] = mean_ci(sel)
    th = tuple(float(v) for v in thresholds)
    if th:
        p, lo, hi = empirical_ccdf(samples, th)
    else:
        p = lo = hi = np.empty(0)
    util = busy / horizon if horizon > 0 else np.zeros_like(busy)
    notes = []
    for j, u in enumerate(util):
        if u >= UTIL_WARN:
            notes.append(f"server {workload.cluster.ids[j]}: measured utilization {u:.6f} suggests instability")
    for msg in notes:
        warnings.warn(msg, RuntimeWarning, stacklevel=3)
    return SimReport(policy_label, mean, ci, per_mean, per_ci, th, p, lo, hi, util, int(samples.size), notes, samples, sfiles)


def _warmup(jobs: int, warmup) -> int:
    if warmup is None:
        return jobs // 10
    if not 0 <= warmup < jobs:
        raise ValueError("warmup must lie in [0, jobs)")
    return int(warmup)


# ---------------------------------------------------------------- probabilistic scheduling


def _lindley(arrival: np.ndarray, service: np.ndarray) -> np.ndarray:
    """FIFO completion times C_i = max(A_i, C_{i-1}) + S_i via a running maximum."""
    cum = np.cumsum(service)
    prev = cum - service
    return np.maximum.accumulate(arrival - prev) + cum


def _access_sets(workload: Workload, pi: np.ndarray, files: np.ndarray, seed: int, rep: int):
    """Per request, the array of chosen server indices (sampled file by file)."""
    rng = stream(seed, rep, 1)
    sets = [None] * workload.r
    for i in range(workload.r):
        count = int((files == i).sum())
        if count:
            sets[i] = sample_access_sets(pi[i], int(workload.k[i]), rng, count)
    return sets


def _probabilistic(workload: Workload, pi: np.ndarray, times, files, seed, rep, seg_counts):
    """Per-server FIFO queues; request r brings seg_counts[file] chunks to each chosen server.

    Returns (per request list of (server, first flat index) pairs, flat finish
    times per server, busy times, horizon).
    """
    jobs = len(times)
    sets = _access_sets(workload, pi, files, seed, rep)
    servers = _service_streams(workload, seed, rep)
    m = workload.m
    # chosen[r] = server indices of request r, k_i columns, grouped per file
    req_servers = [None] * jobs
    pos = np.zeros(workload.r, dtype=int)
    chosen_flat_req, chosen_flat_srv = [], []
    for i in range(workload.r):
        idx = np.nonzero(files == i)[0]
        if idx.size:
            chosen_flat_req.append(np.repeat(idx, workload.k[i]))
            chosen_flat_srv.append(sets[i].ravel())
    req = np.concatenate(chosen_flat_req)
    srv = np.concatenate(chosen_flat_srv)
    order = np.lexsort((req, srv))
    req, srv = req[order], srv[order]
    finish = {}
    offset = np.zeros(req.size, dtype=np.int64)
    busy = np.zeros(m)
    horizon = 0.0
    bounds = np.searchsorted(srv, np.arange(m + 1))
    for j in range(m):
        a, b = bounds[j], bounds[j + 1]
        if a == b:
            finish[j] = np.empty(0)
            continue
        r_j = req[a:b]
        counts = seg_counts[files[r_j]]
        x = servers[j].take(int(counts.sum()))
        starts_idx = np.concatenate(([0], np.cumsum(counts)[:-1]))
        totals = np.add.reduceat(x, starts_idx)
        done = _lindley(times[r_j], totals)
        begin = done - totals
        seg_finish = np.repeat(begin, counts) + _segmented_cumsum(x, starts_idx)
        finish[j] = seg_finish
        offset[a:b] = starts_idx
        busy[j] = float(x.sum())
        horizon = max(horizon, float(done[-1]) if done.size else 0.0)
    return req, srv, offset, finish, busy, horizon


def _segmented_cumsum(x: np.ndarray, starts: np.ndarray) -> np.ndarray:
    """Cumulative sums restarting at each index in starts."""
    cum = np.cumsum(x)
    base = np.repeat(cum[starts] - x[starts], np.diff(np.append(starts, x.size)))
    return cum - base


def _run_probabilistic(workload, policy, jobs, warmup, seed, rep, thresholds):
    pi = getattr(policy.pi, "pi", np.asarray(policy.pi, dtype=float))
    times, files = _arrivals(workload, jobs, seed, rep)
    ones = np.ones(workload.r, dtype=int)
    req, srv, offset, finish, busy, horizon = _probabilistic(workload, pi, times, files, seed, rep, ones)
    done = np.full(jobs, -np.inf)
    for j in range(workload.m):
        sel = srv == j
        if sel.any():
            np.maximum.at(done, req[sel], finish[j][offset[sel]])
    latency = done - times
    return _report(policy.label(), workload, latency, files, _warmup(jobs, warmup), thresholds, busy, horizon)


def video_replay(workload: Workload, pi, d_s: float, jobs: int, seed: int = 0, warmup=None, thresholds=(), rep: int = 0) -> SimReport:
    """Stall durations when every request streams its L_i segments from k_i servers.

    Each chosen server serves the request's L_i chunks back to back in FIFO
    order; segment q is ready when all k_i servers have delivered chunk q.
    With L_i = 1 and the same seed the draws equal the probabilistic run.
    """
    pi = getattr(pi, "pi", np.asarray(pi, dtype=float))
    times, files = _arrivals(workload, jobs, seed, rep)
    segs = workload.segments.astype(int)
    req, srv, offset, finish, busy, horizon = _probabilistic(workload, pi, times, files, seed, rep, segs)
    stall = np.empty(jobs)
    order = np.lexsort((srv, req))
    req_o, srv_o, off_o = req[order], srv[order], offset[order]
    base = {}
    flat = []
    start = 0
    for j in range(workload.m):
        base[j] = start
        flat.append(finish[j])
        start += finish[j].size
    flat = np.concatenate(flat) if flat else np.empty(0)
    gidx = np.array([base[j] for j in srv_o], dtype=np.int64) + off_o
    for i in range(workload.r):
        idx = np.nonzero(files == i)[0]
        if idx.size == 0:
            continue
        k, L = int(workload.k[i]), int(segs[i])
        sel = np.isin(req_o, idx)
        g = gidx[sel].reshape(idx.size, k)
        d = flat[g[:, :, None] + np.arange(L)].max(axis=1) - times[idx][:, None]
        stall[idx] = play_time_stall(d, d_s, workload.files[i].segment_length)
    return _report(f"{VIDEO}(d_s={d_s})", workload, stall, files, _warmup(jobs, warmup), thresholds, busy, horizon)


# ---------------------------------------------------------------- fork-join


def _run_fork_join(workload, policy, jobs, warmup, seed, rep, thresholds):
    """Every request goes to all n_i servers; it ends at the k_i-th finish.

    Copies still queued at that instant are dropped; copies in service are
    aborted unless policy.abort_running is False, in which case they run to
    completion. Each server is FIFO, so request r only depends on earlier ones.
    """
    times, files = _arrivals(workload, jobs, seed, rep)
    servers = _service_streams(workload, seed, rep)
    free = np.zeros(workload.m)
    busy = np.zeros(workload.m)
    places = [np.nonzero(workload.support[i])[0] for i in range(workload.r)]
    latency = np.empty(jobs)
    for r in range(jobs):
        a = times[r]
        i = files[r]
        k = int(workload.k[i])
        place = places[i]
        start = np.maximum(free[place], a)
        order = np.argsort(start, kind="stable")
        finishes = []
        started = []
        kth = math.inf
        for idx in order:
            s = start[idx]
            if len(finishes) >= k and s >= kth:
                break
            j = place[idx]
            f = s + servers[j].next()
            started.append((j, s, f))
            heapq.heappush(finishes, -f)
            if len(finishes) > k:
                heapq.heappop(finishes)
            if len(finishes) == k:
                kth = -finishes[0]
        done = kth
        for j, s, f in started:
            end = min(f, done) if policy.abort_running else f
            free[j] = end
            busy[j] += end - s
        latency[r] = done - a
    horizon = float(free.max())
    return _report(policy.label(), workload, latency, files, _warmup(jobs, warmup), thresholds, busy, horizon)


# ---------------------------------------------------------------- shared buffer (MDS) policies


class _Batch:
    __slots__ = ("idx", "file", "arrival", "size", "need", "buffered", "served", "running", "finished", "mode", "done")

    def __init__(self, idx, file, arrival, size, need):
        self.idx = idx
        self.file = file
        self.arrival = arrival
        self.size = size
        self.need = need
        self.buffered = size
        self.served = set()
        self.running = set()
        self.finished = 0
        self.mode = "blocked"
        self.done = False


class _SharedBuffer:
    """Batches wait in one ordered buffer.

    The first t waiting batches (the window) hand out single jobs to servers
    that have not yet served them; later batches wait until they move into
    the window, except that Reservation(0) starts the head batch as a whole
    once enough servers are idle and M^k/M/n(t) lets window-exhausted servers
    take jobs of the first blocked batch regardless of the distinct-server
    rule. A batch of size v ends at its k-th finished job; its other jobs
    are dropped or aborted.
    """

    def __init__(self, workload, policy, times, files, seed, rep):
        self.wl = workload
        self.kind = policy.kind
        self.t = math.inf if policy.t is None else policy.t
        self.v = policy.v
        self.times = times
        self.files = files
        self.servers = _service_streams(workload, seed, rep)
        m = workload.m
        self.placement = [set(np.nonzero(workload.support[i])[0].tolist()) for i in range(workload.r)]
        self.job_of = [None] * m
        self.start = np.zeros(m)
        self.token = [0] * m
        self.busy = np.zeros(m)
        self.buffer = []
        self.heap = []
        self.seq = 0
        self.now = 0.0
        self.latency = np.full(len(times), math.nan)

    def _push(self, when, kind, data):
        self.seq += 1
        heapq.heappush(self.heap, (when, self.seq, kind, data))

    def _window_size(self):
        return sum(1 for b in self.buffer if b.mode == "window")

    def _begin(self, s, batch, relaxed=False):
        # distinct-server rule; only the M^k/M/n relaxation may break it
        assert relaxed or s not in batch.served, f"server {s} already served batch {batch.idx}"
        batch.buffered -= 1
        batch.running.add(s)
        if not relaxed:
            batch.served.add(s)
        self.job_of[s] = batch
        self.start[s] = self.now
        self.token[s] += 1
        self._push(self.now + self.servers[s].next(), "done", (s, self.token[s]))

    def _stop(self, s):
        self.busy[s] += self.now - self.start[s]
        self.job_of[s] = None

    def _find_work(self, s) -> bool:
        for b in self.buffer:
            if b.mode == "window" and b.buffered > 0 and s not in b.served and s in self.placement[b.file]:
                self._begin(s, b)
                return True
        if self.kind == MKMN:
            for b in self.buffer:
                if b.mode in ("blocked", "relaxed") and b.buffered > 0:
                    if s in self.placement[b.file]:
                        b.mode = "relaxed"
                        self._begin(s, b, relaxed=True)
                        return True
                    break
        return False

    def _idle(self):
        return [s for s in range(self.wl.m) if self.job_of[s] is None]

    def _settle(self):
        changed = True
        while changed:
            changed = False
            before = len(self.buffer)
            self.buffer = [b for b in self.buffer if b.buffered > 0 and not b.done]
            changed |= len(self.buffer) != before
            window = self._window_size()
            for b in self.buffer:
                if window >= self.t:
                    break
                if b.mode == "blocked":
                    b.mode = "window"
                    window += 1
                    changed = True
            if self.kind == RESERVATION and self.t == 0:
                while self.buffer:
                    head = self.buffer[0]
                    idle = [s for s in self._idle() if s in self.placement[head.file]]
                    if len(idle) < head.buffered:
                        break
                    for s in idle[: head.buffered]:
                        self._begin(s, head)
                    self.buffer.pop(0)
                    changed = True
            for s in self._idle():
                if self._find_work(s):
                    changed = True

    def _arrive(self, r):
        i = int(self.files[r])
        k = int(self.wl.k[i])
        size = self.v if self.kind == FLOOD and self.v is not None else k
        self.buffer.append(_Batch(r, i, self.now, size, k))

    def _finish(self, s):
        batch = self.job_of[s]
        self._stop(s)
        batch.running.discard(s)
        batch.finished += 1
        if batch.finished >= batch.need and not batch.done:
            batch.done = True
            self.latency[batch.idx] = self.now - batch.arrival
            batch.buffered = 0
            for other in list(batch.running):
                self._stop(other)
                self.token[other] += 1
            batch.running.clear()
        self._find_work(s)

    def run(self):
        n_jobs = len(self.times)
        next_arrival = 0
        if n_jobs:
            self._push(self.times[0], "arr", 0)
        while self.heap:
            when, _, kind, data = heapq.heappop(self.heap)
            if kind == "done":
                s, tok = data
                if tok != self.token[s] or self.job_of[s] is None:
                    continue
                self.now = when
                self._finish(s)
            else:
                self.now = when
                self._arrive(data)
                next_arrival = data + 1
                if next_arrival < n_jobs:
                    self._push(self.times[next_arrival], "arr", next_arrival)
            self._settle()
        horizon = self.now
        return self.latency, self.busy, horizon


def _run_shared(workload, policy, jobs, warmup, seed, rep, thresholds):
    if policy.kind == FLOOD:
        bad = [f.id for f in workload.files if policy.v is None or not f.code.k <= policy.v <= len(f.placement)]
        if bad:
            raise ValidationError([f"file {fid}: need k <= v <= n for redundant requests" for fid in bad])
    times, files = _arrivals(workload, jobs, seed, rep)
    sim = _SharedBuffer(workload, policy, times, files, seed, rep)
    latency, busy, horizon = sim.run()
    return _report(policy.label(), workload, latency, files, _warmup(jobs, warmup), thresholds, busy, horizon)


# ---------------------------------------------------------------- single fork (one job, no queue)


@dataclass
class ForkEstimate:
    mean_completion: float
    mean_cost: float
    se_completion: float
    se_cost: float
    reps: int


def single_fork_monte_carlo(plan: ForkPlan, reps: int, seed: int = 0, chunk: int = 100_000) -> ForkEstimate:
    """Monte Carlo of one delayed-relaunch job.

    n0 chunks start at 0; at the l0-th finish t1 the other n - n0 start; the
    job ends at the k-th finish t2, when every running chunk is cancelled.
    Cost = cost_rate * sum over servers of (min(finish, t2) - start).
    """
    if reps < 1:
        raise ValueError("reps must be >= 1")
    rng = stream(seed, 0, 0)
    n, k, n0, l0, c, mu = plan.n, plan.k, plan.n0, plan.l0, plan.c, plan.mu
    s_sum = s_sq = w_sum = w_sq = 0.0
    done = 0
    while done < reps:
        size = min(chunk, reps - done)
        x = c + rng.exponential(1.0 / mu, (size, n))
        first = x[:, :n0]
        t1 = np.partition(first, l0 - 1, axis=1)[:, l0 - 1]
        if n0 < n:
            late = t1[:, None] + x[:, n0:]
            fin = np.concatenate([first, late], axis=1)
        else:
            fin = first
        t2 = np.partition(fin, k - 1, axis=1)[:, k - 1]
        run_first = np.minimum(first, t2[:, None]).sum(axis=1)
        if n0 < n:
            run_late = (np.minimum(late, t2[:, None]) - t1[:, None]).sum(axis=1)
        else:
            run_late = 0.0
        w = plan.cost_rate * (run_first + run_late)
        s_sum += float(t2.sum())
        s_sq += float((t2 * t2).sum())
        w_sum += float(w.sum())
        w_sq += float((w * w).sum())
        done += size
    ms, mw = s_sum / reps, w_sum / reps
    if reps > 1:
        se_s = math.sqrt(max(s_sq / reps - ms * ms, 0.0) * reps / (reps - 1) / reps)
        se_w = math.sqrt(max(w_sq / reps - mw * mw, 0.0) * reps / (reps - 1) / reps)
    else:
        se_s = se_w = math.inf
    return ForkEstimate(ms, mw, se_s, se_w, reps)


# ---------------------------------------------------------------- front door


def run_scenario(workload: Workload, policy: PolicyConfig, jobs: int, warmup=None, seed: int = 0, thresholds: Sequence = (), rep: int = 0) -> SimReport:
    """Simulate `jobs` requests under the policy and summarize the latencies (stalls for video)."""
    if jobs < 1:
        raise ValueError("jobs must be >= 1")
    kind = policy.kind
    if kind == PROBABILISTIC:
        return _run_probabilistic(workload, policy, jobs, warmup, seed, rep, thresholds)
    if kind == VIDEO:
        return video_replay(workload, policy.pi, policy.d_s, jobs, seed, warmup, thresholds, rep)
    if kind == FORK_JOIN:
        return _run_fork_join(workload, policy, jobs, warmup, seed, rep, thresholds)
    if kind in (RESERVATION, MKMN, FLOOD):
        return _run_shared(workload, policy, jobs, warmup, seed, rep, thresholds)
    if kind == SINGLE_FORK:
        raise ValidationError(["delayed single fork is a single-job model; use single_fork_monte_carlo"])
    raise ValidationError([f"unknown policy kind {kind!r}"])


@dataclass
class CompareRow:
    policy: str
    scale: float
    mean: float
    ci: float
    diverged: bool


def scale_workload(workload: Workload, factor: float) -> Workload:
    """Same files and cluster with every arrival rate multiplied by factor."""
    from dataclasses import replace

    from .core import validate_workload

    files = [replace(f, arrival_rate=f.arrival_rate * factor) for f in workload.files]
    return validate_workload(files, workload.cluster)


def compare_policies(workload: Workload, policies: Sequence[PolicyConfig], scales: Sequence[float], jobs: int, seed: int = 0, ceiling: float = math.inf):
    """Mean latency per policy and arrival-rate scale; rows with mean > ceiling are flagged diverged."""
    rows = []
    for policy in policies:
        for scale in scales:
            wl = scale_workload(workload, scale)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)
                rep = run_scenario(wl, policy, jobs, seed=seed)
            diverged = bool(rep.mean > ceiling or rep.warnings)
            rows.append(CompareRow(policy.label(), float(scale), rep.mean, rep.ci, diverged))
    return rows


def redundant_flood_experiment(n: int, k: int, v_grid: Sequence[int], lam: float, mu: float, jobs: int, seed: int = 0):
    """Mean latency of the MDS queue when each request sends v >= k jobs; returns {v: (mean, ci)}."""
    from .core import Cluster, CodeSpec, Exponential, FileSpec, Server, validate_workload

    cluster = Cluster(tuple(Server(f"s{j}", Exponential(mu)) for j in range(n)))
    wl = validate_workload([FileSpec("f", lam, CodeSpec(n, k), tuple(f"s{j}" for j in range(n)))], cluster)
    out = {}
    for v in v_grid:
        if not k <= v <= n:
            raise ValidationError([f"need k <= v <= n, got v={v}"])
        rep = run_scenario(wl, PolicyConfig(FLOOD, v=v), jobs, seed=seed)
        out[v] = (rep.mean, rep.ci)
    return out
