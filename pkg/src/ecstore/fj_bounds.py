"""Fork-Join latency bounds and approximations for (n, k) coded files."""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .errors import BoundInfeasible, InstabilityError
from .specfun import cnk_constant, harmonic


def _check_code(n: int, k: int):
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= n, got n={n}, k={k}")


def fj_upper_exp(n: int, k: int, lam: float, mu: float) -> float:
    """Split-merge upper bound for exponential service.

    H1/mu + lam (H2 + H1^2) / (2 mu^2 (1 - rho H1)), with H^z = H^z_{n-k,n}.
    Valid only while rho H1 < 1, a region strictly inside stability.
    """
    _check_code(n, k)
    h1 = harmonic(n - k, n, 1)
    h2 = harmonic(n - k, n, 2)
    rho = lam / mu
    if rho * h1 >= 1.0:
        raise BoundInfeasible(f"rho*H1 = {rho * h1:.6g} >= 1", limit=mu / h1)
    return h1 / mu + lam * (h2 + h1 * h1) / (2.0 * mu * mu * (1.0 - rho * h1))


def fj_lower_exp(n: int, k: int, lam: float, mu: float) -> float:
    """Stage-wise lower bound sum_{j=0}^{k-1} 1 / ((n-j) mu - lam)."""
    _check_code(n, k)
    if lam >= (n - k + 1) * mu:
        raise InstabilityError(f"lambda={lam} >= (n-k+1) mu = {(n - k + 1) * mu}", lam / ((n - k + 1) * mu))
    return sum(1.0 / ((n - j) * mu - lam) for j in range(k))


def fj_approx_exp(n: int, k: int, lam: float, mu: float) -> float:
    """Tandem-queue approximation sum_{j=0}^{k-1} 1 / ((n-j) mu - (k-j) lam)."""
    _check_code(n, k)
    if k * lam >= n * mu:
        raise InstabilityError(f"k*lambda={k * lam} >= n*mu={n * mu}", k * lam / (n * mu))
    return sum(1.0 / ((n - j) * mu - (k - j) * lam) for j in range(k))


def fj_upper_general(n: int, k: int, lam: float, mean: float, sigma: float) -> float:
    """Upper bound for general service with mean 1/mu and standard deviation sigma.

    E[S] <= 1/mu + sigma sqrt((k-1)/(n-k+1)) bounds the k-th order statistic,
    Var bounded by C(n,k) sigma^2, and the split-merge PK formula is applied.
    """
    _check_code(n, k)
    es = mean + sigma * math.sqrt((k - 1) / (n - k + 1))
    if lam * es >= 1.0:
        raise BoundInfeasible(f"lambda*E[S] = {lam * es:.6g} >= 1", limit=1.0 / es)
    c = cnk_constant(n, k)
    return es + lam * (es * es + c * sigma * sigma) / (2.0 * (1.0 - lam * es))


def fj_lower_sexp(n: int, k: int, lam: float, shift: float, rate: float) -> float:
    """Lower bound for shifted-exponential Sexp(shift, rate) service.

    The first stage is an M/G/1 whose service is the minimum of n shifted
    exponentials (mean shift + 1/(n rate)); the remaining k-1 stages are
    M/M/1 queues with rates (n-j) rate.
    """
    _check_code(n, k)
    m1 = shift + 1.0 / (n * rate)
    m2 = m1 * m1 + (1.0 / (n * rate)) ** 2
    if lam * m1 >= 1.0:
        raise InstabilityError(f"lambda*(shift + 1/(n rate)) = {lam * m1:.6g} >= 1", lam * m1)
    total = m1 + lam * m2 / (2.0 * (1.0 - lam * m1))
    for j in range(1, k):
        d = (n - j) * rate - lam
        if d <= 0:
            raise InstabilityError(f"stage {j}: (n-j) rate - lambda = {d:.6g} <= 0")
        total += 1.0 / d
    return total


# ---------------------------------------------------------------- heterogeneous files


def _unpack(files):
    arr = np.asarray([(float(f[0]), int(f[1]), float(f[2])) for f in files], dtype=float)
    return arr[:, 0], arr[:, 1].astype(int), arr[:, 2]


def fj_hetero_stability(files: Sequence, n: int, mu: float) -> bool:
    """(sum k_i lam_i)(sum lam_i l_i / k_i) < n mu sum lam_i; vacuously true when all lam_i = 0."""
    lam, k, size = _unpack(files)
    total = lam.sum()
    if total == 0:
        return True
    return float((k * lam).sum() * (lam * size / k).sum()) < n * mu * total


def fj_hetero_upper(i: int, files: Sequence, n: int, mu: float) -> float:
    """Upper bound on file i's mean latency with per-file rate mu_i = k_i mu / l_i."""
    lam, k, size = _unpack(files)
    rates = k * mu / size
    h1 = np.array([harmonic(n - kk, n, 1) for kk in k])
    h2 = np.array([harmonic(n - kk, n, 2) for kk in k])
    load = float((lam / rates * h1).sum())
    if load >= 1.0:
        raise BoundInfeasible(f"sum rho_j H1_j = {load:.6g} >= 1")
    second = float((lam * (h2 + h1 * h1) / rates**2).sum())
    return h1[i] / rates[i] + second / (2.0 * (1.0 - load))


def fj_hetero_lower(i: int, files: Sequence, n: int, mu: float) -> float:
    """Stage-wise lower bound on file i's mean latency.

    Stage s (1 <= s <= k_i) is an M/G/1 fed by every file with k_j >= s,
    whose service at that stage is exponential with rate (n-s+1) mu_j.
    Sorting by k is implicit in the k_j >= s filter.
    """
    lam, k, size = _unpack(files)
    rates = k * mu / size
    total = 0.0
    for s in range(1, k[i] + 1):
        active = k >= s
        c = n - s + 1
        load = float((lam[active] / (c * rates[active])).sum())
        if load >= 1.0:
            raise InstabilityError(f"stage {s}: load {load:.6g} >= 1", load)
        second = float((lam[active] / (c * c * rates[active] ** 2)).sum())
        total += 1.0 / (c * rates[i]) + second / (1.0 - load)
    return total
