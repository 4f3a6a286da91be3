"""Quasi-birth-death chains for MDS-Reservation(t) and M^k/M/n(t) queues.

n identical exponential servers (rate mu) hold one chunk each of every file;
a request is a batch of k jobs that must run on k distinct servers.

State of the chain
------------------
Only the first t waiting batches (the window) may be served piecemeal. For a
window of T <= t batches, w[i] is the number of jobs of batch i still in the
buffer. A server's history is summarized by its frontier f: it has served
window batches 1..f and none after, so w is non-decreasing and the number of
servers at frontier f is w[f+1] - w[f] (k - w[T] at f = T). Servers below
the last frontier are always busy; z counts idle servers, all at frontier T.
nb counts blocked batches behind the window (the level of the QBD) and s_h
the jobs of the first blocked batch already started (M^k/M/n(t) only).

Rules
-----
* A server finishing a job at frontier f < T takes a job of window batch f+1.
* At frontier T it goes idle (Reservation) or, in M^k/M/n(t), takes the next
  job of the first blocked batch, ignoring the distinct-server rule.
* When the head window batch has no buffered jobs it leaves the window and
  blocked batches move into it; idle servers take jobs from each new one.
* Reservation(0) starts the first blocked batch as a whole when k servers
  are idle.

Mean latency follows from Little's law on waiting batches plus the time a
batch still needs once its last job has started: the max of the J jobs then
running, H_J / mu. J is tracked exactly through the per-frontier counts of
servers running window jobs (o) and first-blocked-batch jobs (h).
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import InstabilityError, SolverError
from .specfun import harmonic

RESERVATION = "reservation"
MKMN = "mkmn"
JOBS = "jobs"
MAX_PROBE_LEVEL = 6


@dataclass(frozen=True)
class ChainState:
    """w: buffered jobs per window batch; z: idle servers; nb: blocked batches;
    s_h: started jobs of the first blocked batch; o[f-1]: servers at frontier f
    running a job of window batch f; h[f]: servers at frontier f running a job
    of the first blocked batch."""

    w: tuple
    z: int
    nb: int
    s_h: int
    o: tuple
    h: tuple


@dataclass
class _Rules:
    n: int
    k: int
    t: int
    policy: str

    def frontier_counts(self, w):
        n, k = self.n, self.k
        if not w:
            return [n]
        counts = [n - (k - w[0])]
        counts += [w[i + 1] - w[i] for i in range(len(w) - 1)]
        counts.append(k - w[-1])
        return counts

    def jobs(self, s: ChainState) -> int:
        return (self.n - s.z) + sum(s.w) + s.nb * self.k - s.s_h

    def _take_head_job(self, st, dispatched):
        """A free server at the last frontier starts a job of the first blocked batch."""
        st["s_h"] += 1
        st["h"][-1] += 1
        if st["s_h"] == self.k:
            dispatched.append(sum(st["h"]))
            st["h"] = [0] * len(st["h"])
            st["nb"] -= 1
            st["s_h"] = 0

    def settle(self, st, dispatched) -> ChainState:
        k, t = self.k, self.t
        while len(st["w"]) < t and st["nb"] - (1 if st["s_h"] > 0 else 0) > 0:
            take = min(st["z"], k)
            st["z"] -= take
            st["nb"] -= 1
            if take == k:
                dispatched.append(k)
            else:
                st["w"].append(k - take)
                st["o"].append(take)
                st["h"].append(0)
        if self.policy == RESERVATION and t == 0:
            while st["z"] >= k and st["nb"] > 0:
                st["z"] -= k
                st["nb"] -= 1
                dispatched.append(k)
        if self.policy == MKMN:
            while st["z"] > 0 and st["nb"] > 0:
                st["z"] -= 1
                self._take_head_job(st, dispatched)
        return ChainState(tuple(st["w"]), st["z"], st["nb"], st["s_h"], tuple(st["o"]), tuple(st["h"]))

    @staticmethod
    def _open(s: ChainState) -> dict:
        return {"w": list(s.w), "z": s.z, "nb": s.nb, "s_h": s.s_h, "o": list(s.o), "h": list(s.h)}

    def arrival(self, s: ChainState):
        k, t = self.k, self.t
        dispatched = []
        st = self._open(s)
        untouched = s.nb - (1 if s.s_h > 0 else 0)
        if len(s.w) < t and untouched == 0:
            take = min(s.z, k)
            st["z"] -= take
            if take == k:
                dispatched.append(k)
            else:
                st["w"].append(k - take)
                st["o"].append(take)
                st["h"].append(0)
            return self.settle(st, dispatched), dispatched
        st["nb"] += 1
        return self.settle(st, dispatched), dispatched

    def completions(self, s: ChainState):
        """List of (busy servers, new state, dispatched J values), one entry per server class."""
        out = []
        counts = self.frontier_counts(s.w)
        T = len(s.w)
        for f in range(T + 1):
            own = s.o[f - 1] if f >= 1 else 0
            head = s.h[f]
            other = counts[f] - own - head - (s.z if f == T else 0)
            for cls, mult in (("own", own), ("head", head), ("other", other)):
                if mult <= 0:
                    continue
                st = self._open(s)
                if cls == "own":
                    st["o"][f - 1] -= 1
                elif cls == "head":
                    st["h"][f] -= 1
                dispatched = []
                if f < T:
                    st["w"][f] -= 1
                    st["o"][f] += 1
                    if f == 0 and st["w"][0] == 0:
                        dispatched.append(st["o"][0])
                        st["w"].pop(0)
                        st["o"].pop(0)
                        h0 = st["h"].pop(0)
                        st["h"][0] += h0
                elif self.policy == MKMN and st["nb"] > 0:
                    self._take_head_job(st, dispatched)
                else:
                    st["z"] += 1
                out.append((mult, self.settle(st, dispatched), dispatched))
        return out


@dataclass
class QbdBlocks:
    """Generator blocks of a level-independent QBD with a boundary.

    Boundary states form one block; levels c, c+1, ... share the phase set.
    B1: boundary to boundary, B2: boundary to level c, B0: level c to boundary,
    A1: within a level, A2: up one level, A0: down one level.
    """

    B1: np.ndarray
    B2: np.ndarray
    B0: np.ndarray
    A0: np.ndarray
    A1: np.ndarray
    A2: np.ndarray
    first_level: int = 1
    boundary_states: list = field(default_factory=list)
    level_phases: list = field(default_factory=list)
    # per-state reward vectors used by the latency formulas
    boundary_batches: np.ndarray = None
    level_batches: np.ndarray = None
    boundary_jobs: np.ndarray = None
    level_jobs: np.ndarray = None
    boundary_residual: np.ndarray = None
    level_residual: np.ndarray = None
    level_step_batches: float = 1.0
    level_step_jobs: float = 0.0
    k: int = 1
    policy: str = RESERVATION

    def full_generator(self, levels: int = 3) -> np.ndarray:
        """Boundary plus `levels` repeating levels, truncated (last level keeps its up-rate)."""
        nb0, p = self.B1.shape[0], self.A1.shape[0]
        size = nb0 + levels * p
        q = np.zeros((size, size))
        q[:nb0, :nb0] = self.B1
        q[:nb0, nb0:nb0 + p] = self.B2
        for lv in range(levels):
            a = nb0 + lv * p
            q[a:a + p, a:a + p] = self.A1
            if lv == 0:
                q[a:a + p, :nb0] = self.B0
            else:
                q[a:a + p, a - p:a] = self.A0
            if lv + 1 < levels:
                q[a:a + p, a + p:a + 2 * p] = self.A2
        return q

    def row_sum_error(self) -> float:
        """Largest |row sum| over the boundary and one repeating level."""
        b = np.abs(self.B1.sum(1) + self.B2.sum(1)).max(initial=0.0)
        a = np.abs(self.B0.sum(1) + self.A1.sum(1) + self.A2.sum(1)).max(initial=0.0)
        a2 = np.abs(self.A0.sum(1) + self.A1.sum(1) + self.A2.sum(1)).max(initial=0.0)
        return float(max(b, a, a2))


def _enumerate(rules: _Rules, max_level: int):
    """Breadth-first enumeration of reachable states up to max_level.

    Returns the states and a list of transitions
    (src, dst, kind, multiplicity, dispatched J values).
    """
    start = ChainState((), rules.n, 0, 0, (), (0,))
    seen = {start}
    queue = deque([start])
    trans = []
    while queue:
        s = queue.popleft()
        moves = []
        new, disp = rules.arrival(s)
        moves.append(("arr", 1, new, disp))
        for mult, new, disp in rules.completions(s):
            moves.append(("svc", mult, new, disp))
        for kind, mult, new, disp in moves:
            if abs(new.nb - s.nb) > 1:
                raise SolverError(f"transition {s} -> {new} skips a level")
            if new.nb > max_level:
                continue
            trans.append((s, new, kind, mult, tuple(disp)))
            if new not in seen:
                seen.add(new)
                queue.append(new)
    return seen, trans


def _phase(s: ChainState):
    return (s.w, s.z, s.s_h, s.o, s.h)


def _build(n, k, t, lam, mu, policy) -> QbdBlocks:
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= n, got n={n}, k={k}")
    if t < 0:
        raise ValueError("t must be >= 0")
    if lam < 0 or mu <= 0:
        raise ValueError("need lambda >= 0 and mu > 0")
    rules = _Rules(n, k, t, policy)
    states, trans = _enumerate(rules, MAX_PROBE_LEVEL)
    by_level = {}
    for s in states:
        by_level.setdefault(s.nb, set()).add(_phase(s))
    rate = {"arr": lam, "svc": mu}

    def level_block(src_level, dst_level, phases):
        idx = {ph: i for i, ph in enumerate(phases)}
        m = np.zeros((len(phases), len(phases)))
        for s, d, kind, mult, _ in trans:
            if s.nb == src_level and d.nb == dst_level:
                m[idx[_phase(s)], idx[_phase(d)]] += rate[kind] * mult
        return m

    first = None
    for c in range(1, MAX_PROBE_LEVEL - 2):
        ph = by_level.get(c)
        if ph is None or any(by_level.get(c + j) != ph for j in (1, 2, 3)):
            continue
        phases = sorted(ph)
        same = (
            np.array_equal(level_block(c, c, phases), level_block(c + 1, c + 1, phases))
            and np.array_equal(level_block(c, c + 1, phases), level_block(c + 1, c + 2, phases))
            and np.array_equal(level_block(c + 1, c, phases), level_block(c + 2, c + 1, phases))
        )
        if same:
            first = c
            break
    if first is None:
        raise SolverError(f"no repeating level structure found for n={n}, k={k}, t={t}")

    phases = sorted(by_level[first])
    boundary = sorted((s for s in states if s.nb < first), key=lambda s: (s.nb, _phase(s)))
    bidx = {s: i for i, s in enumerate(boundary)}
    pidx = {ph: i for i, ph in enumerate(phases)}
    nb0, p = len(boundary), len(phases)
    B1, B2, B0 = np.zeros((nb0, nb0)), np.zeros((nb0, p)), np.zeros((p, nb0))
    A1 = level_block(first, first, phases)
    A2 = level_block(first, first + 1, phases)
    A0 = level_block(first + 1, first, phases)
    b_res, l_res = np.zeros(nb0), np.zeros(p)
    for s, d, kind, mult, disp in trans:
        r = rate[kind] * mult
        res = r * sum(harmonic(0, j) for j in disp) / mu
        if s.nb < first:
            b_res[bidx[s]] += res
            if d.nb < first:
                B1[bidx[s], bidx[d]] += r
            else:
                B2[bidx[s], pidx[_phase(d)]] += r
        elif s.nb == first:
            l_res[pidx[_phase(s)]] += res
            if d.nb < first:
                B0[pidx[_phase(s)], bidx[d]] += r
    for m in (B1, A1):
        np.fill_diagonal(m, 0.0)
    B1 -= np.diag(B1.sum(1) + B2.sum(1))
    A1 -= np.diag(A0.sum(1) + A1.sum(1) + A2.sum(1))
    # level c's down-rates go to the boundary; they must equal the repeating ones
    if not np.allclose(B0.sum(1), A0.sum(1)):
        raise SolverError("down-rates out of the first repeating level differ from A0")
    bl_states = [ChainState(ph[0], ph[1], first, ph[2], ph[3], ph[4]) for ph in phases]
    return QbdBlocks(
        B1=B1, B2=B2, B0=B0, A0=A0, A1=A1, A2=A2,
        first_level=first,
        boundary_states=boundary,
        level_phases=bl_states,
        boundary_batches=np.array([len(s.w) + s.nb for s in boundary], dtype=float),
        level_batches=np.array([len(s.w) + s.nb for s in bl_states], dtype=float),
        boundary_jobs=np.array([rules.jobs(s) for s in boundary], dtype=float),
        level_jobs=np.array([rules.jobs(s) for s in bl_states], dtype=float),
        boundary_residual=b_res,
        level_residual=l_res,
        level_step_batches=1.0,
        level_step_jobs=float(k),
        k=k,
        policy=policy,
    )


def build_reservation_chain(n: int, k: int, t: int, lam: float, mu: float) -> QbdBlocks:
    """QBD of the MDS-Reservation(t) queue; the level is the number of blocked batches."""
    return _build(n, k, t, lam, mu, RESERVATION)


def build_mkmn_chain(n: int, k: int, t: int, lam: float, mu: float) -> QbdBlocks:
    """QBD of the M^k/M/n(t) relaxation: jobs behind the window ignore the distinct-server rule."""
    return _build(n, k, t, lam, mu, MKMN)


def scalar_blocks(lam: float, mu: float) -> QbdBlocks:
    """Birth-death chain of an M/M/1 queue written as 1x1 QBD blocks (boundary = empty state)."""
    one = lambda v: np.array([[float(v)]])
    return QbdBlocks(
        B1=one(-lam), B2=one(lam), B0=one(mu),
        A0=one(mu), A1=one(-(lam + mu)), A2=one(lam),
        first_level=1,
        boundary_batches=np.array([0.0]), level_batches=np.array([1.0]),
        boundary_jobs=np.array([0.0]), level_jobs=np.array([1.0]),
        boundary_residual=np.array([0.0]), level_residual=np.array([0.0]),
        level_step_batches=1.0, level_step_jobs=1.0, k=1, policy=JOBS,
    )


@dataclass
class Stationary:
    """pi_B on the boundary and pi_c on the first repeating level; pi_{c+j} = pi_c R^j."""

    boundary: np.ndarray
    first: np.ndarray
    R: np.ndarray
    iterations: int

    def level(self, j: int) -> np.ndarray:
        """Distribution on repeating level c + j."""
        return self.first @ np.linalg.matrix_power(self.R, j)

    def total(self) -> float:
        p = self.R.shape[0]
        tail = np.linalg.solve((np.eye(p) - self.R).T, self.first)
        return float(self.boundary.sum() + tail.sum())


def rate_matrix(blocks: QbdBlocks, tol: float = 1e-10, max_iter: int = 100_000):
    """Minimal solution of A2 + R A1 + R^2 A0 = 0 by successive substitution.

    Iterates R <- A2 (-A1 - R A0)^{-1} from R = 0 until the entrywise change
    drops below tol. Returns (R, iterations). Raises SolverError when the
    level drift is not positive.
    """
    p = blocks.A1.shape[0]
    R = np.zeros((p, p))
    if not blocks.A2.any():
        return R, 0
    d = drift(blocks)
    if d <= 0:
        # the spectral radius of the minimal R tends to 1 too slowly to detect from the iterates
        raise SolverError(f"level drift {d:.6g} is not positive; chain unstable")
    for it in range(1, max_iter + 1):
        new = np.linalg.solve((-blocks.A1 - R @ blocks.A0).T, blocks.A2.T).T
        delta = np.abs(new - R).max()
        R = new
        if delta < tol:
            sr = float(np.abs(np.linalg.eigvals(R)).max())
            if sr >= 1.0 - 1e-12:
                raise SolverError(f"rate matrix has spectral radius {sr:.6g} >= 1; chain unstable", sr)
            return R, it
    sr = float(np.abs(np.linalg.eigvals(R)).max())
    raise SolverError(f"R iteration did not converge in {max_iter} steps (spectral radius estimate {sr:.6g})", sr)


def solve_qbd(blocks: QbdBlocks, tol: float = 1e-10, max_iter: int = 100_000) -> Stationary:
    """Stationary distribution of the QBD.

    Solves pi_B B1 + pi_c B0 = 0 and pi_B B2 + pi_c (A1 + R A0) = 0 with the
    normalization pi_B 1 + pi_c (I - R)^{-1} 1 = 1.
    """
    R, iters = rate_matrix(blocks, tol, max_iter)
    nb0, p = blocks.B1.shape[0], blocks.A1.shape[0]
    top = np.hstack([blocks.B1, blocks.B2])
    bottom = np.hstack([blocks.B0, blocks.A1 + R @ blocks.A0])
    g = np.vstack([top, bottom])
    norm = np.concatenate([np.ones(nb0), np.linalg.solve(np.eye(p) - R, np.ones(p))])
    # pi G = 0 has rank one less than its size; replace one balance equation by the normalization
    system = g.T.copy()
    system[-1] = norm
    rhs = np.zeros(nb0 + p)
    rhs[-1] = 1.0
    try:
        x = np.linalg.solve(system, rhs)
    except np.linalg.LinAlgError:
        x, *_ = np.linalg.lstsq(system, rhs, rcond=None)
    resid = max(np.abs(x @ g).max(), abs(norm @ x - 1.0))
    if resid > 1e-8:
        raise SolverError(f"boundary system residual {resid:.3g}")
    return Stationary(x[:nb0], x[nb0:], R, iters)


def _level_sums(blocks: QbdBlocks, dist: Stationary):
    """(sum_j pi_{c+j}, sum_j j pi_{c+j}) as phase vectors."""
    p = dist.R.shape[0]
    inv = np.linalg.inv(np.eye(p) - dist.R)
    mass = dist.first @ inv
    weighted = dist.first @ dist.R @ inv @ inv
    return mass, weighted


def mean_batches(blocks: QbdBlocks, dist: Stationary) -> float:
    """Mean number of waiting (not fully started) batches."""
    mass, weighted = _level_sums(blocks, dist)
    return float(
        dist.boundary @ blocks.boundary_batches + mass @ blocks.level_batches + weighted.sum() * blocks.level_step_batches
    )


def mean_jobs(blocks: QbdBlocks, dist: Stationary) -> float:
    """Mean number of jobs in the system (buffered plus in service)."""
    mass, weighted = _level_sums(blocks, dist)
    return float(dist.boundary @ blocks.boundary_jobs + mass @ blocks.level_jobs + weighted.sum() * blocks.level_step_jobs)


def mean_latency_from_stationary(blocks: QbdBlocks, dist: Stationary, lam: float) -> float:
    """Mean batch latency by Little's law.

    (E[waiting batches] + sum of dispatch rates times H_J/mu) / lambda; chains
    built with policy JOBS (plain birth-death) use E[jobs] / (k lambda).
    """
    if lam <= 0:
        raise ValueError("lambda must be > 0 for a latency")
    total = dist.total()
    if not abs(total - 1.0) < 1e-6:
        raise InstabilityError(f"stationary mass {total:.6g} != 1")
    if blocks.policy == JOBS:
        return mean_jobs(blocks, dist) / (blocks.k * lam)
    mass, _ = _level_sums(blocks, dist)
    residual = dist.boundary @ blocks.boundary_residual + mass @ blocks.level_residual
    return float((mean_batches(blocks, dist) + residual) / lam)


def mean_latency(policy: str, n: int, k: int, t: int, lam: float, mu: float, tol: float = 1e-10) -> float:
    """Build, solve and evaluate the chain in one call."""
    build = build_reservation_chain if policy == RESERVATION else build_mkmn_chain
    blocks = build(n, k, t, lam, mu)
    return mean_latency_from_stationary(blocks, solve_qbd(blocks, tol), lam)


def drift(blocks: QbdBlocks) -> float:
    """Mean downward minus upward rate of the repeating levels; positive means stable."""
    a = blocks.A0 + blocks.A1 + blocks.A2
    p = a.shape[0]
    system = np.vstack([a.T, np.ones((1, p))])
    rhs = np.zeros(p + 1)
    rhs[-1] = 1.0
    v, *_ = np.linalg.lstsq(system, rhs, rcond=None)
    return float(v @ blocks.A0.sum(1) - v @ blocks.A2.sum(1))


def max_throughput(builder, n: int, k: int, t: int, mu: float, tol: float = None) -> float:
    """Largest lambda with positive drift, by bisection on (0, n mu / k].

    builder is build_reservation_chain or build_mkmn_chain.
    """
    hi = n * mu / k
    tol = tol if tol is not None else 1e-4 * hi
    if drift(builder(n, k, t, hi, mu)) > 0:
        return hi
    lo = 0.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if drift(builder(n, k, t, mid, mu)) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
