"""M/G/1 primitives: utilization, Pollaczek-Khinchine mean, waiting-time MGF and moments."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import Deterministic, Exponential, ServiceModel, ShiftedExponential
from .errors import DomainError, InfeasibleTError, InstabilityError


@dataclass(frozen=True)
class Mg1Input:
    arrival_rate: float
    service: ServiceModel

    def __post_init__(self):
        if self.arrival_rate < 0:
            raise ValueError("arrival rate must be >= 0")


def utilization(inp: Mg1Input) -> float:
    return inp.arrival_rate * inp.service.mean()


def _require_stable(inp: Mg1Input) -> float:
    rho = utilization(inp)
    if rho >= 1.0:
        raise InstabilityError(f"utilization {rho:.6g} >= 1", rho)
    return rho


def pk_mean_response(lam: float, mean: float, second_moment: float = None, variance: float = None) -> float:
    """Mean sojourn time E[S] + lam E[S^2] / (2 (1 - lam E[S])).

    Give either the second moment or the variance of the service time.
    """
    if (second_moment is None) == (variance is None):
        raise ValueError("give exactly one of second_moment or variance")
    if second_moment is None:
        second_moment = variance + mean * mean
    rho = lam * mean
    if rho >= 1.0:
        raise InstabilityError(f"utilization {rho:.6g} >= 1", rho)
    return mean + lam * second_moment / (2.0 * (1.0 - rho))


def _expm1mx(x):
    """exp(x) - 1 - x without cancellation."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 1e-3
    series = x * x * (0.5 + x * (1.0 / 6 + x * (1.0 / 24 + x * (1.0 / 120 + x / 720))))
    return np.where(small, series, np.expm1(x) - x)


def mgf_remainder(service: ServiceModel, t):
    """Z(t) - 1 - t E[S], computed without cancellation for the closed-form families."""
    t = np.asarray(t, dtype=float)
    if isinstance(service, Exponential):
        mu = service.rate
        service._check_t(t)
        return t * t / (mu * (mu - t))
    if isinstance(service, ShiftedExponential):
        a, b = service.rate, service.shift
        service._check_t(t)
        return _expm1mx(b * t) + t * (a * np.expm1(b * t) + t) / (a * (a - t))
    if isinstance(service, Deterministic):
        return _expm1mx(service.value * t)
    return service.mgf_minus_one(t) - t * service.mean()


def _denominator(inp: Mg1Input, t):
    """g(t) = t - Lambda (Z(t) - 1)."""
    return t - inp.arrival_rate * inp.service.mgf_minus_one(t)


def waiting_mgf(inp: Mg1Input, t, sojourn: bool = True):
    """Pollaczek-Khinchine transform (1-rho) t Z(t) / (t - Lambda (Z(t)-1)).

    With sojourn=True the service factor Z(t) is included (sojourn time);
    sojourn=False returns the queueing-delay MGF only.
    """
    rho = _require_stable(inp)
    t = np.asarray(t, dtype=float)
    if np.any(t >= inp.service.mgf_bound):
        raise InfeasibleTError(f"t={t} outside the service MGF domain t < {inp.service.mgf_bound}")
    zero = t == 0
    ts = np.where(zero, 1.0, t)
    g = _denominator(inp, ts)
    if np.any((g <= 0) & ~zero):
        raise InfeasibleTError(f"t={t} violates t > Lambda (Z(t) - 1)")
    # W(t) - 1 = Lambda R(t) / g(t) with R(t) = Z(t) - 1 - t E[S]
    lam = inp.arrival_rate
    w = 1.0 + lam * mgf_remainder(inp.service, ts) / g
    w = np.where(zero, 1.0, w)
    if sojourn:
        w = w * inp.service.mgf(np.where(zero, 0.0, t))
    return float(w) if w.ndim == 0 else w


def _log_wait_mgf(inp: Mg1Input, t: float) -> float:
    if t == 0:
        return 0.0
    lam = inp.arrival_rate
    r = float(mgf_remainder(inp.service, t))
    rho = utilization(inp)
    g = t * (1.0 - rho) - lam * r
    if t > 0 and g <= 0:
        raise InfeasibleTError(f"t={t} outside the feasible interval")
    return math.log1p(lam * r / g)


def feasible_t_sup(service: ServiceModel, lam: float, tol: float = 1e-12) -> float:
    """Largest t with t > lam (Z(t) - 1): the positive root of g, capped by the MGF domain.

    g is concave with g(0) = 0 and g'(0) = 1 - rho > 0, so bisection on the
    sign of g brackets the unique positive root.
    """
    inp = Mg1Input(lam, service)
    _require_stable(inp)
    bound = service.mgf_bound
    if bound <= 0.0:
        return 0.0
    if lam == 0:
        return bound
    lo = 0.0
    if math.isinf(bound):
        hi = 1.0
        while _denominator(inp, hi) > 0:
            lo, hi = hi, hi * 2.0
    else:
        hi = bound
    for _ in range(400):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        try:
            positive = _denominator(inp, mid) > 0
        except DomainError:
            positive = False
        if positive:
            lo = mid
        else:
            hi = mid
        if hi - lo < tol * max(1.0, hi):
            break
    return 0.5 * (lo + hi)


def waiting_moments(inp: Mg1Input, sojourn: bool = False):
    """Mean and variance of the queueing delay (or sojourn time when sojourn=True).

    The variance is the second derivative of the log-MGF at zero, taken by
    central differences with step 1e-5 and one Richardson extrapolation.
    Service laws whose MGF is infinite for t > 0 fall back to the moment
    formula Var = E[Wq]^2 + Lambda E[S^3] / (3 (1 - rho)).
    """
    rho = _require_stable(inp)
    lam = inp.arrival_rate
    s = inp.service
    mean_wait = lam * s.second_moment() / (2.0 * (1.0 - rho))
    if lam == 0:
        var_wait = 0.0
    elif s.mgf_bound > 0:
        def d2(h):
            return (_log_wait_mgf(inp, h) + _log_wait_mgf(inp, -h)) / (h * h)

        h = 1e-5
        h = min(h, 0.25 * feasible_t_sup(s, lam))
        var_wait = (4.0 * d2(h / 2) - d2(h)) / 3.0
    else:
        var_wait = mean_wait**2 + lam * s.third_moment() / (3.0 * (1.0 - rho))
    if sojourn:
        return mean_wait + s.mean(), var_wait + s.variance()
    return mean_wait, var_wait
