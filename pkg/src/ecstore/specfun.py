"""Special functions: harmonic numbers, order statistics, hypergeometric series,
incomplete gamma, and the integral identities used by the relaunch analysis."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple, Sequence

import numpy as np
from scipy import integrate, special

from .errors import DomainError, QuadratureError, SeriesDivergence

# ---------------------------------------------------------------- harmonic numbers

_prefix_cache: dict = {}


def _prefix(y: int, z: int) -> float:
    """Float prefix sum sum_{j=1}^{y} 1/j^z, always accumulated in the same order."""
    table = _prefix_cache.setdefault(z, [0.0])
    while len(table) <= y:
        j = len(table)
        table.append(table[-1] + 1.0 / j**z)
    return table[y]


def harmonic(x: int, y: int, z: int = 1) -> float:
    """Generalized harmonic number H^z_{x,y} = sum_{j=x+1}^{y} 1/j^z.

    Built as a difference of cached prefix sums, so
    harmonic(x, y) == harmonic(0, y) - harmonic(0, x) holds bit for bit.
    """
    x, y, z = int(x), int(y), int(z)
    if x < 0 or y < x:
        raise DomainError(f"harmonic needs 0 <= x <= y, got x={x}, y={y}")
    if x == y:
        return 0.0
    return _prefix(y, z) - _prefix(x, z)


def exp_order_stat_moments(n: int, j: int, mu: float):
    """Mean and variance of the j-th smallest of n i.i.d. Exp(mu) variables."""
    if not 1 <= j <= n:
        raise DomainError(f"order statistic index j={j} outside 1..{n}")
    return harmonic(n - j, n, 1) / mu, harmonic(n - j, n, 2) / mu**2


def order_stat_cdf(n: int, j: int, F):
    """P(X_j^n <= x) = sum_{i=j}^{n} C(n,i) F^i (1-F)^(n-i), with F = F(x)."""
    F = np.asarray(F, dtype=float)
    if np.any((F < 0) | (F > 1)):
        raise DomainError("cdf value outside [0, 1]")
    total = np.zeros_like(F)
    for i in range(j, n + 1):
        total = total + math.comb(n, i) * F**i * (1.0 - F) ** (n - i)
    total = np.clip(total, 0.0, 1.0)
    return float(total) if total.ndim == 0 else total


# ---------------------------------------------------------------- hypergeometric series


@dataclass(frozen=True)
class HypergeometricSpec:
    a: tuple
    b: tuple
    z: float
    tol: float = 1e-12

    def __post_init__(self):
        object.__setattr__(self, "a", tuple(float(v) for v in self.a))
        object.__setattr__(self, "b", tuple(float(v) for v in self.b))
        for bj in self.b:
            if bj <= 0 and bj == int(bj):
                raise DomainError(f"denominator parameter {bj} is a non-positive integer")
        if not self.tol > 0:
            raise DomainError("tolerance must be positive")


class SeriesResult(NamedTuple):
    value: float
    terms: int


def _terminates(a) -> bool:
    return any(ai <= 0 and ai == int(ai) for ai in a)


def hypergeometric_pFq(spec: HypergeometricSpec, max_terms: int = 10**6) -> SeriesResult:
    """Sum the series pFq[a; b; z] term by term.

    Stops once three consecutive terms fall below tol * max(1, |sum|).
    Returns the sum and the number of terms used.
    """
    z = spec.z
    if z != 0 and len(spec.a) > len(spec.b) + 1 and not _terminates(spec.a):
        raise DomainError(f"{len(spec.a)}F{len(spec.b)} diverges for every z != 0 unless it terminates")
    if abs(z) >= 1 and not _terminates(spec.a):
        raise DomainError(f"series needs |z| < 1 unless it terminates, got z={z}")
    total = 1.0
    term = 1.0
    small = 0
    for nterm in range(max_terms):
        ratio = z / (nterm + 1)
        for ai in spec.a:
            ratio *= ai + nterm
        for bj in spec.b:
            ratio /= bj + nterm
        term *= ratio
        total += term
        if abs(term) < spec.tol * max(1.0, abs(total)):
            small += 1
            if small >= 3:
                return SeriesResult(total, nterm + 2)
        else:
            small = 0
    raise SeriesDivergence("hypergeometric series did not converge", total, max_terms)


def hyp(a: Sequence[float], b: Sequence[float], z: float, tol: float = 1e-12) -> float:
    """Convenience wrapper returning only the value of pFq[a; b; z]."""
    return hypergeometric_pFq(HypergeometricSpec(tuple(a), tuple(b), z, tol)).value


# ---------------------------------------------------------------- integral identities


def integral_identity_lhs(p: int, q: int, c: float, mu: float) -> float:
    """Quadrature of int_0^c x e^{-mu x}(1-e^{-mu x})^q (e^{-mu x}-e^{-mu c})^{p-q} dx / (1-e^{-mu c})^{p+2}."""
    if not (0 <= q <= p and c > 0 and mu > 0):
        raise DomainError("need 0 <= q <= p, c > 0, mu > 0")
    ec = math.exp(-mu * c)
    alpha = -math.expm1(-mu * c)

    def f(x):
        ex = math.exp(-mu * x)
        return x * ex * (-math.expm1(-mu * x)) ** q * max(ex - ec, 0.0) ** (p - q)

    val, err = integrate.quad(f, 0.0, c, epsabs=1e-13, epsrel=1e-12, limit=500)
    val /= alpha ** (p + 2)
    err /= alpha ** (p + 2)
    if err > 1e-10:
        raise QuadratureError(f"quadrature error estimate {err:.3g} exceeds 1e-10")
    return val


def integral_identity_rhs(p: int, q: int, c: float, mu: float) -> float:
    """Series side: 3F2[1, 1, q+2; 2, p+3; alpha] / ((p+2) mu^2 C(p+1, q+1)), alpha = 1-e^{-mu c}."""
    if not (0 <= q <= p and c > 0 and mu > 0):
        raise DomainError("need 0 <= q <= p, c > 0, mu > 0")
    alpha = -math.expm1(-mu * c)
    return hyp((1, 1, q + 2), (2, p + 3), alpha) / ((p + 2) * mu**2 * math.comb(p + 1, q + 1))


def integral_identity_closed(m: int, c: float, mu: float) -> float:
    """Closed form of m mu int_0^c x e^{-mu x}(1-e^{-mu x})^{m-1} dx."""
    alpha = -math.expm1(-mu * c)
    return c * alpha**m - c + sum(alpha**i / (i * mu) for i in range(1, m + 1))


# ---------------------------------------------------------------- incomplete gamma / beta


def lower_incomplete_gamma(a: float, x: float) -> float:
    """Unregularized lower incomplete gamma gamma(a, x).

    Power series for x < a + 1, otherwise Gamma(a) minus the upper function
    from a modified Lentz continued fraction.
    """
    if not a > 0:
        raise DomainError(f"incomplete gamma needs a > 0, got {a}")
    if x < 0:
        raise DomainError(f"incomplete gamma needs x >= 0, got {x}")
    if x == 0:
        return 0.0
    log_pref = a * math.log(x) - x
    if x < a + 1.0:
        term = 1.0 / a
        total = term
        ap = a
        for _ in range(100000):
            ap += 1.0
            term *= x / ap
            total += term
            if abs(term) < abs(total) * 1e-16:
                break
        return math.exp(log_pref) * total
    tiny = 1e-300
    b = x + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, 100000):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            break
    upper = math.exp(log_pref) * h
    return math.gamma(a) - upper


@lru_cache(maxsize=None)
def cnk_constant(n: int, k: int) -> float:
    """C(n,k) = sup_{x in (0,1)} I_x(k, n+1-k)(1 - I_x(k, n+1-k)) / (x(1-x)).

    I_x is the regularized incomplete beta function (the cdf of the k-th
    order statistic of n uniforms). The endpoint limits are taken
    analytically and the interior by a logit-spaced scan refined with
    golden-section search.
    """
    if not 1 <= k <= n:
        raise DomainError(f"need 1 <= k <= n, got n={n}, k={k}")
    a, b = k, n + 1 - k

    def g(x):
        ix = special.betainc(a, b, x)
        return ix * (1.0 - ix) / (x * (1.0 - x))

    # Near x=0, I_x ~ C(n,k) x^k, so the ratio tends to n when k=1 and to 0 otherwise.
    left = float(n) if k == 1 else 0.0
    # Near x=1, 1 - I_x ~ C(n,n) (1-x)^{n-k+1} ... ratio tends to n when k=n and 0 otherwise.
    right = float(n) if k == n else 0.0
    best = max(left, right)
    u = np.linspace(-30.0, 30.0, 4001)
    xs = 1.0 / (1.0 + np.exp(-u))
    xs = xs[(xs > 0) & (xs < 1)]
    vals = g(xs)
    i = int(np.argmax(vals))
    lo = xs[max(i - 1, 0)]
    hi = xs[min(i + 1, len(xs) - 1)]
    phi = (math.sqrt(5.0) - 1.0) / 2.0
    x1 = hi - phi * (hi - lo)
    x2 = lo + phi * (hi - lo)
    f1, f2 = g(x1), g(x2)
    for _ in range(200):
        if f1 > f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - phi * (hi - lo)
            f1 = g(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + phi * (hi - lo)
            f2 = g(x2)
        if hi - lo < 1e-15:
            break
    interior = max(f1, f2, float(vals[i]))
    return max(best, interior)
