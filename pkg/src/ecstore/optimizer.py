"""Joint choice of access probabilities pi and Chernoff parameters t.

The objective is theta * sum_i w_i mean_i + (1 - theta) * sum_i w_i tail_i,
with the mean and tail bounds of probabilistic scheduling (file mode) or of
video streaming (stall mode). Optimization alternates a t-block (vectorized
golden-section searches) with a pi-block (projected gradient with
backtracking). Every iterate stays inside

    {pi : sum_j pi_ij = k_i, 0 <= pi <= 1, pi = 0 off the placement,
          rho_j <= 1 - margin}.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import linprog, minimize

from .core import FileSpec, Workload, validate_workload
from .errors import InfeasibleProjection, SolverError, ValidationError
from .search import golden_min_vec
from .video import geometric_sum, log_chunk_mgf, log_mgf_matrix, segment_lengths

FILE = "file"
VIDEO = "video"
MARGIN = 0.05
MAX_STEP = 1e3
FEAS_TOL = 1e-8
GRID_LO = 1e-7


@dataclass(frozen=True)
class OptProblem:
    """Optimization instance.

    threshold is the tail point (latency sigma in file mode, stall x in video
    mode); weights default to lambda_i / sum(lambda).
    """

    workload: Workload
    theta: float = 1.0
    threshold: float = 1.0
    mode: str = FILE
    weights: np.ndarray = None
    d_s: float = 0.0
    margin: float = MARGIN

    def __post_init__(self):
        problems = []
        if not 0.0 <= self.theta <= 1.0:
            problems.append(f"theta must lie in [0, 1], got {self.theta}")
        if self.mode not in (FILE, VIDEO):
            problems.append(f"mode must be {FILE!r} or {VIDEO!r}")
        if not 0.0 <= self.margin < 1.0:
            problems.append("margin must lie in [0, 1)")
        if self.threshold < 0:
            problems.append("tail threshold must be >= 0")
        if problems:
            raise ValidationError(problems)
        w = self.weights
        if w is None:
            lam = self.workload.lam
            w = lam / lam.sum()
        object.__setattr__(self, "weights", np.asarray(w, dtype=float))

    @property
    def segments(self) -> np.ndarray:
        wl = self.workload
        return wl.segments.astype(float) if self.mode == VIDEO else np.ones(wl.r)

    @property
    def tau(self) -> np.ndarray:
        return segment_lengths(self.workload) if self.mode == VIDEO else np.zeros(self.workload.r)

    @property
    def offset(self) -> float:
        """Constant added to H inside the log: 1 for stalls, 0 for latency."""
        return 1.0 if self.mode == VIDEO else 0.0


@dataclass
class OptTrace:
    objectives: list
    violations: list
    pi: np.ndarray
    t_mean: np.ndarray
    t_tail: np.ndarray
    objective: float
    mean_metric: float
    tail_metric: float
    converged: bool
    placement: tuple = field(default=None)


# ---------------------------------------------------------------- feasible set


def _load_coefficients(workload: Workload, segments) -> np.ndarray:
    """a[i, j] with rho_j = sum_i a[i, j] pi[i, j], zero off the placement."""
    a = (workload.lam * segments)[:, None] * workload.cluster.means()[None, :]
    return np.where(workload.support, a, 0.0)


def _row_project(x: np.ndarray, k: np.ndarray, support: np.ndarray) -> np.ndarray:
    """Per-row projection onto {sum = k, 0 <= x <= 1, zero off support} by bisection on the shift."""
    big = np.where(support, x, -np.inf)
    lo = np.min(np.where(support, x, np.inf), axis=1) - 1.0
    hi = np.max(big, axis=1)
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        s = np.clip(big - mid[:, None], 0.0, 1.0).sum(axis=1)
        above = s > k
        lo = np.where(above, mid, lo)
        hi = np.where(above, hi, mid)
    return np.clip(big - (0.5 * (lo + hi))[:, None], 0.0, 1.0)


def _column_project(x: np.ndarray, a: np.ndarray, cap: float) -> np.ndarray:
    load = (a * x).sum(axis=0)
    norm = (a * a).sum(axis=0)
    excess = np.where((load > cap) & (norm > 0), (load - cap) / np.where(norm > 0, norm, 1.0), 0.0)
    return x - excess[None, :] * a


def constraint_violation(pi, workload: Workload, margin: float = MARGIN, segments=None) -> float:
    """Largest violation of row sums, box, support and the utilization cap."""
    pi = np.asarray(pi, dtype=float)
    segments = np.ones(workload.r) if segments is None else segments
    a = _load_coefficients(workload, segments)
    rows = np.abs(pi.sum(axis=1) - workload.k).max()
    box = max(float((-pi).max()), float((pi - 1.0).max()), 0.0)
    off = float(np.abs(np.where(workload.support, 0.0, pi)).max())
    rho = (a * pi).sum(axis=0) - (1.0 - margin)
    return float(max(rows, box, off, max(float(rho.max()), 0.0)))


def _lp_feasible(workload: Workload, a: np.ndarray, cap: float) -> bool:
    idx = np.argwhere(workload.support)
    nv = len(idx)
    a_eq = np.zeros((workload.r, nv))
    a_eq[idx[:, 0], np.arange(nv)] = 1.0
    a_ub = np.zeros((workload.m, nv))
    a_ub[idx[:, 1], np.arange(nv)] = a[idx[:, 0], idx[:, 1]]
    res = linprog(np.zeros(nv), A_ub=a_ub, b_ub=np.full(workload.m, cap), A_eq=a_eq, b_eq=workload.k.astype(float), bounds=(0.0, 1.0), method="highs")
    return res.status == 0


def _dual_multipliers(x0: np.ndarray, a: np.ndarray, cap: float, k: np.ndarray, support: np.ndarray) -> np.ndarray:
    """Column multipliers nu >= 0 maximizing the Lagrangian dual of the projection.

    For fixed nu the inner problem splits by row into a box-simplex projection of
    x0 - nu a; the dual gradient is the column load minus the cap.
    """
    m = a.shape[1]

    def negdual(nu):
        x = _row_project(x0 - nu[None, :] * a, k, support)
        slack = (a * x).sum(axis=0) - cap
        val = 0.5 * float(((x - x0) ** 2).sum()) + float(nu @ slack)
        return -val, -slack

    res = minimize(negdual, np.zeros(m), jac=True, method="L-BFGS-B", bounds=[(0.0, None)] * m, options={"ftol": 1e-15, "gtol": 1e-13, "maxiter": 5000})
    return np.maximum(res.x, 0.0)


def project_to_feasible(pi_raw, workload: Workload, margin: float = MARGIN, segments=None, max_sweeps: int = 1000, tol: float = 1e-10) -> np.ndarray:
    """Euclidean projection onto the feasible access polytope.

    A dual solve over the column multipliers gives a near-optimal start that
    Dykstra's alternating projections then polish.
    segments weights each file's load by its chunk count (video mode).
    Raises InfeasibleProjection when the polytope is empty.
    """
    segments = np.ones(workload.r) if segments is None else np.asarray(segments, dtype=float)
    x = np.asarray(pi_raw, dtype=float)
    if x.shape != (workload.r, workload.m):
        raise ValidationError([f"access matrix shape {x.shape} != ({workload.r}, {workload.m})"])
    x = np.where(workload.support, x, 0.0)
    if not np.isfinite(x).all():
        raise ValidationError(["access matrix has non-finite entries"])
    a = _load_coefficients(workload, segments)
    cap = 1.0 - margin
    k = workload.k.astype(float)
    if np.any(workload.support.sum(axis=1) < workload.k):
        raise InfeasibleProjection("some file has fewer eligible servers than k")
    x0 = x
    nu = _dual_multipliers(x0, a, cap, k, workload.support)
    # warm-start Dykstra at the dual solution; x + p + q == x0 is its invariant
    q = nu[None, :] * a
    x = _row_project(x0 - q, k, workload.support)
    p = x0 - x - q
    y = x
    for _ in range(max_sweeps):
        y = _row_project(x + p, k, workload.support)
        p = x + p - y
        z = _column_project(y + q, a, cap)
        q = y + q - z
        move = float(np.abs(z - x).max())
        x = z
        if move < tol:
            break
    if constraint_violation(y, workload, margin, segments) > FEAS_TOL:
        if not _lp_feasible(workload, a, cap):
            rho_min = _min_peak_load(workload, a)
            raise InfeasibleProjection(f"no access matrix keeps every server below utilization {cap:.6g} (best achievable peak about {rho_min:.6g})")
        raise SolverError("alternating projection did not reach the feasible set")
    return y


def _min_peak_load(workload: Workload, a: np.ndarray) -> float:
    """Smallest achievable max_j rho_j, from a small linear program."""
    idx = np.argwhere(workload.support)
    nv = len(idx)
    c = np.zeros(nv + 1)
    c[-1] = 1.0
    a_eq = np.zeros((workload.r, nv + 1))
    a_eq[idx[:, 0], np.arange(nv)] = 1.0
    a_ub = np.zeros((workload.m, nv + 1))
    a_ub[idx[:, 1], np.arange(nv)] = a[idx[:, 0], idx[:, 1]]
    a_ub[:, -1] = -1.0
    bounds = [(0.0, 1.0)] * nv + [(0.0, None)]
    res = linprog(c, A_ub=a_ub, b_ub=np.zeros(workload.m), A_eq=a_eq, b_eq=workload.k.astype(float), bounds=bounds, method="highs")
    return float(res.x[-1]) if res.status == 0 else math.inf


def baseline_pea(problem: OptProblem) -> np.ndarray:
    """Projected equal access: k_i / n_i on the placement, then projected."""
    wl = problem.workload
    raw = wl.support * (wl.k / wl.support.sum(axis=1))[:, None]
    return project_to_feasible(raw, wl, problem.margin, problem.segments)


def baseline_psp(problem: OptProblem) -> np.ndarray:
    """Projected service-rate proportional access: k_i mu_j / sum mu over the placement, then projected."""
    wl = problem.workload
    mu = 1.0 / wl.cluster.means()
    rates = np.where(wl.support, mu[None, :], 0.0)
    raw = wl.k[:, None] * rates / rates.sum(axis=1, keepdims=True)
    return project_to_feasible(raw, wl, problem.margin, problem.segments)


def baseline_random(problem: OptProblem, rng: np.random.Generator) -> np.ndarray:
    """Uniform random weights on the placement, scaled to row sums k_i, then projected."""
    wl = problem.workload
    raw = np.where(wl.support, rng.random((wl.r, wl.m)), 0.0)
    raw = wl.k[:, None] * raw / raw.sum(axis=1, keepdims=True)
    return project_to_feasible(raw, wl, problem.margin, problem.segments)


# ---------------------------------------------------------------- bound evaluation


class _Model:
    """Bound values and gradients at fixed pi for the problem's mode."""

    def __init__(self, problem: OptProblem, pi: np.ndarray):
        self.pb = problem
        wl = problem.workload
        self.wl = wl
        self.pi = pi
        self.L = problem.segments
        self.uniq, self.inv = np.unique(self.L, return_inverse=True)
        self.lam = wl.lam
        self.mean_s = wl.cluster.means()
        self.rho = ((self.lam * self.L) @ pi) * self.mean_s
        wpi = (self.lam[:, None] * pi)
        self.W = np.zeros((len(self.uniq), wl.m))
        np.add.at(self.W, self.inv, wpi)

    def rows(self, t, L_row, tau_row):
        """H, D, logM and the growth table G[a, u, j] = expm1(L_u logM[a, j]) for row parameters t."""
        t = np.asarray(t, dtype=float)
        logm = log_mgf_matrix(self.wl, t)
        with np.errstate(all="ignore"):
            g = np.expm1(self.uniq[None, :, None] * logm[:, None, :])
            d = t[:, None] - np.einsum("auj,uj->aj", g, self.W)
            ok = np.isfinite(logm) & (d > 0) & (t[:, None] > 0) & (self.rho < 1.0)[None, :]
            lead = (1.0 - self.rho)[None, :] * t[:, None] / d
            u = logm - (t * tau_row)[:, None]
            h = np.exp(-t * (self.pb.d_s - tau_row))[:, None] * lead * geometric_sum(u, L_row[:, None])
        h = np.where(ok, h, np.inf)
        return h, d, logm, g

    def t_sup(self, tol: float = 1e-13) -> np.ndarray:
        """Per-server supremum of t with D_j(t) > 0 and a finite chunk MGF."""
        m = self.wl.m
        hi = np.array([s.service.mgf_bound for s in self.wl.cluster.servers], dtype=float)
        hi = np.where(np.isfinite(hi), hi, 1e3 / self.mean_s)
        lo = np.zeros(m)
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            logm = np.array([float(log_chunk_mgf(s.service, x)) for s, x in zip(self.wl.cluster.servers, mid)])
            with np.errstate(all="ignore"):
                d = mid - (np.expm1(self.uniq[:, None] * logm[None, :]) * self.W).sum(axis=0)
            good = np.isfinite(d) & (d > 0)
            lo = np.where(good, mid, lo)
            hi = np.where(good, hi, mid)
            if np.all(hi - lo <= tol * np.maximum(1.0, hi)):
                break
        return lo

    # -- mean part: rows are files at t_mean
    def mean_parts(self, t):
        h, d, logm, g = self.rows(t, self.L, self.pb.tau)
        v = self.pb.offset + h
        with np.errstate(all="ignore"):
            s = np.where(self.pi > 0, self.pi * v, 0.0).sum(axis=1)
            val = np.log(s) / t
        return val, (h, d, g, v, s)

    def tail_parts(self, t):
        wl = self.wl
        if self.pb.mode == VIDEO:
            h, d, logm, g = self.rows(t, self.L, self.pb.tau)
            v = 1.0 + h
            with np.errstate(all="ignore"):
                s = np.where(self.pi > 0, self.pi * v, 0.0).sum(axis=1)
                val = np.exp(-t * self.pb.threshold) * s
            return val, (h, d, g, v, s)
        h, d, logm, g = self.rows(t, np.ones(wl.m), np.zeros(wl.m))
        j = np.arange(wl.m)
        q = h[j, j]
        with np.errstate(all="ignore"):
            e = np.exp(-t * self.pb.threshold) * q
            val = np.where(self.pi > 0, self.pi * e[None, :], 0.0).sum(axis=1)
        return val, (q, d[j, j], g[j, :, j], e)

    def _chain(self, c, d, g):
        """sum_i c_ij dlogH_ij/dpi_fj for every (f, j), where c has rows matching d and g."""
        coef = -(self.L[:, None] * self.mean_s[None, :]) / (1.0 - self.rho)[None, :]
        with np.errstate(all="ignore"):
            used = c != 0
            e = np.einsum("aj,auj->uj", np.where(used, c / d, 0.0), np.where(used[:, None, :], g, 0.0))
        return self.lam[:, None] * (coef * c.sum(axis=0)[None, :] + e[self.inv])

    def objective(self, t_mean, t_tail):
        w = self.pb.weights
        mean_v, _ = self.mean_parts(t_mean)
        tail_v, _ = self.tail_parts(t_tail)
        mean_m = float(w @ mean_v)
        tail_m = float(w @ tail_v)
        th = self.pb.theta
        obj = (th * mean_m if th > 0 else 0.0) + ((1.0 - th) * tail_m if th < 1 else 0.0)
        return (obj if math.isfinite(obj) else math.inf), mean_m, tail_m

    def gradient(self, t_mean, t_tail) -> np.ndarray:
        w = self.pb.weights
        th = self.pb.theta
        grad = np.zeros_like(self.pi)
        if th > 0:
            _, (h, d, g, v, s) = self.mean_parts(t_mean)
            scale = w / (t_mean * s)
            with np.errstate(all="ignore"):
                direct = scale[:, None] * v
                c = np.where(self.pi > 0, scale[:, None] * self.pi * h, 0.0)
            grad += th * (direct + self._chain(c, d, g))
        if th < 1:
            if self.pb.mode == VIDEO:
                _, (h, d, g, v, s) = self.tail_parts(t_tail)
                scale = w * np.exp(-t_tail * self.pb.threshold)
                with np.errstate(all="ignore"):
                    direct = scale[:, None] * v
                    c = np.where(self.pi > 0, scale[:, None] * self.pi * h, 0.0)
                grad += (1.0 - th) * (direct + self._chain(c, d, g))
            else:
                _, (q, dd, gg, e) = self.tail_parts(t_tail)
                direct = np.broadcast_to(w[:, None] * e[None, :], self.pi.shape) * 1.0
                cj = (w[:, None] * self.pi).sum(axis=0) * e
                coef = -self.mean_s / (1.0 - self.rho)
                with np.errstate(all="ignore"):
                    extra = np.where(cj != 0, cj / dd, 0.0)[None, :] * gg[:, self.inv].T
                grad += (1.0 - th) * (direct + self.lam[:, None] * (coef * cj)[None, :] + self.lam[:, None] * extra)
        return np.where(self.wl.support, grad, 0.0)


# ---------------------------------------------------------------- t-block


def _used_cap(pi: np.ndarray, tsup: np.ndarray) -> np.ndarray:
    return np.where(pi > 0, tsup[None, :], np.inf).min(axis=1) * (1.0 - 1e-9)


def _t_block(model: _Model, t_mean, t_tail):
    """Golden-section (on log t) per file for the mean bound and per server or file for the tail."""
    tsup = model.t_sup()
    hi_file = _used_cap(model.pi, tsup)

    def mean_f(logt):
        val, _ = model.mean_parts(np.exp(logt))
        return val

    lo = np.log(hi_file * GRID_LO)
    new_mean, new_val = golden_min_vec(mean_f, lo, np.log(hi_file), iters=90)
    new_mean = np.exp(new_mean)
    if t_mean is not None:
        old_val = mean_f(np.log(t_mean))
        keep = np.isfinite(old_val) & (old_val <= new_val)
        new_mean = np.where(keep, t_mean, new_mean)

    if model.pb.mode == VIDEO:
        def tail_f(logt):
            t = np.exp(logt)
            val, _ = model.tail_parts(t)
            with np.errstate(all="ignore"):
                return np.log(val)
        hi_tail = hi_file
    else:
        def tail_f(logt):
            t = np.exp(logt)
            _, (q, *_rest) = model.tail_parts(t)
            with np.errstate(all="ignore"):
                return -t * model.pb.threshold + np.log(q)
        hi_tail = tsup * (1.0 - 1e-9)
    new_tail, new_tval = golden_min_vec(tail_f, np.log(hi_tail * GRID_LO), np.log(hi_tail), iters=90)
    new_tail = np.exp(new_tail)
    if t_tail is not None:
        old_tval = tail_f(np.log(t_tail))
        keep = np.isfinite(old_tval) & (old_tval <= new_tval)
        new_tail = np.where(keep, t_tail, new_tail)
    return new_mean, new_tail


# ---------------------------------------------------------------- alternating descent


def evaluate(problem: OptProblem, pi, t_mean=None, t_tail=None):
    """(objective, mean metric, tail metric, t_mean, t_tail), optimizing t when not given."""
    pi = np.asarray(pi, dtype=float)
    model = _Model(problem, pi)
    if t_mean is None or t_tail is None:
        tm, tt = _t_block(model, None, None)
        t_mean = tm if t_mean is None else t_mean
        t_tail = tt if t_tail is None else t_tail
    obj, mean_m, tail_m = model.objective(t_mean, t_tail)
    return obj, mean_m, tail_m, np.asarray(t_mean, dtype=float), np.asarray(t_tail, dtype=float)


def objective_gradient(problem: OptProblem, pi, t_mean, t_tail) -> np.ndarray:
    """Analytic gradient of the objective in pi at fixed t."""
    return _Model(problem, np.asarray(pi, dtype=float)).gradient(np.asarray(t_mean, dtype=float), np.asarray(t_tail, dtype=float))


def _pi_block(problem: OptProblem, pi, t_mean, t_tail, current: float, step: float):
    """One projected-gradient step with backtracking; returns (pi, objective, step)."""
    model = _Model(problem, pi)
    grad = model.gradient(t_mean, t_tail)
    finite = np.isfinite(grad)
    if not finite.all():
        big = 1e3 * (np.abs(grad[finite]).max() if finite.any() else 1.0) + 1.0
        grad = np.where(finite, grad, big)
    scale = float(np.abs(grad).max())
    if scale == 0.0 or not math.isfinite(scale):
        return pi, current, step
    # step in probability units along the max-norm direction, so tiny or huge objectives behave alike
    direction = grad / scale
    eta = 0.1 if step is None else min(step, MAX_STEP)
    segments = problem.segments
    for _ in range(40):
        cand = project_to_feasible(pi - eta * direction, problem.workload, problem.margin, segments)
        moved = cand - pi
        if np.abs(moved).max() < 1e-15:
            break
        val, _, _ = _Model(problem, cand).objective(t_mean, t_tail)
        if val <= current + 1e-4 * float((grad * moved).sum()) and val < current:
            return cand, val, eta * 2.0
        eta *= 0.5
    return pi, current, eta


def optimize(problem: OptProblem, max_outer: int = 50, seed: int = 0, start=None, rel_tol: float = 1e-6, patience: int = 3, inner: int = 30) -> OptTrace:
    """Alternating t-block / pi-block descent from the projected equal-access point.

    The objective never increases: a new t is kept only if it is no worse and
    a pi step only if it lowers the objective. Stops after `patience`
    consecutive outer iterations with relative decrease below rel_tol.
    seed is accepted for interface symmetry; the descent is deterministic.
    """
    del seed
    wl = problem.workload
    pi = baseline_pea(problem) if start is None else project_to_feasible(start, wl, problem.margin, problem.segments)
    model = _Model(problem, pi)
    t_mean, t_tail = _t_block(model, None, None)
    obj, _, _ = model.objective(t_mean, t_tail)
    if not math.isfinite(obj):
        raise InfeasibleProjection("starting point gives an infinite bound")
    objectives = [obj]
    violations = [constraint_violation(pi, wl, problem.margin, problem.segments)]
    step = None
    quiet = 0
    converged = False
    for _ in range(max_outer):
        before = obj
        t_mean, t_tail = _t_block(_Model(problem, pi), t_mean, t_tail)
        obj = min(obj, _Model(problem, pi).objective(t_mean, t_tail)[0])
        for _ in range(inner):
            prev = obj
            pi, obj, step = _pi_block(problem, pi, t_mean, t_tail, obj, step)
            if obj >= prev:
                break
        objectives.append(obj)
        violations.append(constraint_violation(pi, wl, problem.margin, problem.segments))
        if (before - obj) <= rel_tol * abs(before):
            quiet += 1
            if quiet >= patience:
                converged = True
                break
        else:
            quiet = 0
    final, mean_m, tail_m, t_mean, t_tail = evaluate(problem, pi, t_mean, t_tail)
    return OptTrace(objectives, violations, pi, t_mean, t_tail, final, mean_m, tail_m, converged, tuple(f.placement for f in wl.files))


# ---------------------------------------------------------------- placement search and sweeps


def _with_placement(workload: Workload, i: int, old: str, new: str) -> Workload:
    files = list(workload.files)
    f = files[i]
    place = tuple(new if s == old else s for s in f.placement)
    files[i] = replace(f, placement=place)
    return validate_workload(files, workload.cluster)


def optimize_video(problem: OptProblem, placement_moves: int = 0, seed: int = 0, max_outer: int = 50):
    """Local search over placements (single chunk moves, accept if improved) around optimize()."""
    best = optimize(problem, max_outer, seed)
    best_problem = problem
    rng = np.random.default_rng(seed)
    accepted = 0
    for _ in range(placement_moves):
        wl = best_problem.workload
        i = int(rng.integers(wl.r))
        f = wl.files[i]
        outside = [s for s in wl.cluster.ids if s not in f.placement]
        if not outside:
            continue
        old = f.placement[int(rng.integers(len(f.placement)))]
        new = outside[int(rng.integers(len(outside)))]
        cand_wl = _with_placement(wl, i, old, new)
        start = best.pi.copy()
        jo, jn = wl.cluster.index(old), wl.cluster.index(new)
        start[i, jn], start[i, jo] = start[i, jo], 0.0
        cand_problem = replace(best_problem, workload=cand_wl)
        try:
            trace = optimize(cand_problem, max_outer, seed, start=start)
        except (InfeasibleProjection, SolverError):
            continue
        if trace.objective < best.objective:
            best, best_problem = trace, cand_problem
            accepted += 1
    best.placement = tuple(f.placement for f in best_problem.workload.files)
    return best, best_problem.workload, accepted


@dataclass
class FrontierRow:
    theta: float
    mean_metric: float
    tail_metric: float
    objective: float


def tradeoff_sweep(problem: OptProblem, thetas, max_outer: int = 50):
    """optimize() at each theta; both metrics are reported at their own optimal t."""
    rows = []
    for th in thetas:
        trace = optimize(replace(problem, theta=float(th)), max_outer)
        rows.append(FrontierRow(float(th), trace.mean_metric, trace.tail_metric, trace.objective))
    return rows


def random_placement_workload(cluster, count: int, code, rates, rng, segments=None, segment_length: float = 0.0) -> Workload:
    """Files f0..f{count-1}, each placed on n servers drawn uniformly without replacement."""
    ids = cluster.ids
    files = []
    for i in range(count):
        place = tuple(ids[j] for j in sorted(rng.choice(len(ids), size=code.n, replace=False)))
        seg = 1 if segments is None else int(segments[i])
        files.append(FileSpec(f"f{i}", float(rates[i]), code, place, seg, segment_length))
    return validate_workload(files, cluster)
