"""Single-fork delayed relaunch of one coded job with shifted-exponential chunk times.

A job needs k of n chunks. It starts n0 servers at time 0; when l0 of them
finish (time t1) the remaining n - n0 servers are launched. Every chunk takes
c + Exp(mu) seconds from its start. The job ends at the k-th completion t2
and all other servers are cancelled. The cost W integrates the number of
running servers over time, times cost_rate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

from .errors import DomainError
from .specfun import harmonic, hyp


@dataclass(frozen=True)
class ForkPlan:
    n: int
    k: int
    n0: int
    l0: int
    c: float
    mu: float
    cost_rate: float = 1.0

    def __post_init__(self):
        problems = []
        if not 1 <= self.k <= self.n:
            problems.append(f"need 1 <= k <= n, got k={self.k}, n={self.n}")
        if not 1 <= self.n0 <= self.n:
            problems.append(f"need 1 <= n0 <= n, got n0={self.n0}")
        if not 1 <= self.l0 <= min(self.n0, self.k):
            problems.append(f"need 1 <= l0 <= min(n0, k), got l0={self.l0}")
        if self.c < 0 or not self.mu > 0:
            problems.append("need c >= 0 and mu > 0")
        if problems:
            raise DomainError("; ".join(problems))

    @property
    def alpha(self) -> float:
        """Probability that an exponential phase ends within the shift c."""
        return -math.expm1(-self.mu * self.c)


def completion_count_pmf(plan: ForkPlan) -> list:
    """p_m = P(m of the n0 - l0 running initial chunks finish within c after t1)."""
    size = plan.n0 - plan.l0
    a = plan.alpha
    q = math.exp(-plan.mu * plan.c)
    return [math.comb(size, m) * a**m * q ** (size - m) for m in range(size + 1)]


def stage0_interservice_mean(r: int, plan: ForkPlan) -> float:
    """Mean gap between the (r-1)-th and r-th completion among the initial servers."""
    if not 1 <= r <= plan.l0:
        raise DomainError(f"stage-0 index r={r} outside 1..{plan.l0}")
    if r == 1:
        return plan.c + 1.0 / (plan.mu * plan.n0)
    return 1.0 / (plan.mu * (plan.n0 - r + 1))


def mean_fork_time(plan: ForkPlan) -> float:
    """E[t1] = c + (1/mu) H^1_{n0-l0, n0}."""
    return plan.c + harmonic(plan.n0 - plan.l0, plan.n0) / plan.mu


def _window_residual(m: int, plan: ForkPlan) -> float:
    """E[c - s_m | m completions in the window].

    The closed form c a^{-m} - sum_{i<=m} a^{i-m}/(i mu) cancels badly for
    large m; since c = sum_{i>=1} a^i/(i mu) it equals the positive series
    sum_{j>=1} a^j / (mu (m+j)) = a 2F1[1, m+1; m+2; a] / (mu (m+1)).
    """
    a = plan.alpha
    if m == 0:
        return plan.c
    return hyp((1, m + 1), (m + 2,), a, tol=1e-16) * a / (plan.mu * (m + 1))


def _last_in_window_mean(m: int, plan: ForkPlan) -> float:
    """E[s_m | m completions in the window] = c [1 - a^{-m}] + sum_{i<=m} a^{i-m}/(i mu)."""
    return plan.c - _window_residual(m, plan)


def conditional_completion_mean(r: int, m: int, plan: ForkPlan) -> float:
    """E[s_r | exactly m completions in (t1, t1+c]], measured from t1.

    Given m completions, their times are the order statistics of m draws of
    an exponential truncated to (0, c).
    """
    if not 1 <= r <= m:
        raise DomainError(f"need 1 <= r <= m, got r={r}, m={m}")
    if m > plan.n0 - plan.l0:
        raise DomainError(f"m={m} exceeds the n0 - l0 = {plan.n0 - plan.l0} running chunks")
    if plan.c == 0:
        return 0.0
    if r == m:
        return _last_in_window_mean(m, plan)
    a = plan.alpha
    return hyp((1, 1, r + 1), (2, m + 2), a, tol=1e-16) * r * a / (plan.mu * (m + 1))


def _window_gap(r: int, m: int, plan: ForkPlan) -> float:
    """E[s_r - s_{r-1} | m completions in the window], for r <= m."""
    a = plan.alpha
    return hyp((1, r), (m + 2,), a, tol=1e-16) * a / (plan.mu * (m + 1))


def _conditional_stage1_gap(r: int, m: int, plan: ForkPlan) -> float:
    n, l0, mu = plan.n, plan.l0, plan.mu
    if r <= m:
        return _window_gap(r, m, plan)
    if r == m + 1:
        return _window_residual(m, plan) + 1.0 / (mu * (n - l0 - m))
    return 1.0 / (mu * (n - l0 - r + 1))


def stage1_interservice_mean(r: int, plan: ForkPlan) -> float:
    """Mean gap between the (r-1)-th and r-th completion after the fork point t1."""
    if not 1 <= r <= plan.k - plan.l0:
        raise DomainError(f"stage-1 index r={r} outside 1..{plan.k - plan.l0}")
    pmf = completion_count_pmf(plan)
    return sum(p * _conditional_stage1_gap(r, m, plan) for m, p in enumerate(pmf) if p > 0)


def mean_completion_time(plan: ForkPlan) -> float:
    """E[S] = E[t2], the mean time until k chunks are done."""
    et1 = mean_fork_time(plan)
    if plan.n0 < plan.k:
        n, k, mu = plan.n, plan.k, plan.mu
        tail = 0.0
        for m, p in enumerate(completion_count_pmf(plan)):
            j = plan.l0 + m
            tail += p * sum(1.0 / (n - i) for i in range(j, k))
        return plan.c + et1 + tail / mu
    return et1 + sum(stage1_interservice_mean(r, plan) for r in range(1, plan.k - plan.l0 + 1))


def mean_utilization_cost(plan: ForkPlan) -> float:
    """E[W], the cost-weighted integral of running servers over the job."""
    lam = plan.cost_rate
    if plan.n0 < plan.k:
        return lam * plan.n * plan.c + lam * plan.k / plan.mu
    w0 = lam / plan.mu * (plan.l0 + plan.mu * plan.n0 * plan.c)
    w1 = sum((plan.n - plan.l0 - r + 1) * stage1_interservice_mean(r, plan) for r in range(1, plan.k - plan.l0 + 1))
    return w0 + lam * w1


class TradeoffRow(NamedTuple):
    n0: int
    l0: int
    mean_completion: float
    mean_cost: float


def tradeoff_frontier(n: int, k: int, c: float, mu: float, cost_rate: float, n0_grid: Sequence[int], l0_grid: Sequence[int]):
    """Evaluate (E[S], E[W]) on a grid; returns (all rows, Pareto-efficient rows).

    Grid points with l0 > min(n0, k) are skipped.
    """
    rows = []
    for n0 in n0_grid:
        for l0 in l0_grid:
            if not 1 <= l0 <= min(n0, k):
                continue
            plan = ForkPlan(n, k, n0, l0, c, mu, cost_rate)
            rows.append(TradeoffRow(n0, l0, mean_completion_time(plan), mean_utilization_cost(plan)))
    pareto = [
        a for a in rows
        if not any(
            b.mean_completion <= a.mean_completion and b.mean_cost <= a.mean_cost
            and (b.mean_completion < a.mean_completion or b.mean_cost < a.mean_cost)
            for b in rows
        )
    ]
    return rows, pareto
