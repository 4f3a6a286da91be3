"""One-dimensional minimizers shared by the bound and optimizer modules."""

from __future__ import annotations

import math

import numpy as np

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


def golden_min(f, lo: float, hi: float, tol: float = 1e-10, maxiter: int = 200):
    """Golden-section search for a minimum of f on [lo, hi].

    Returns (x, f(x)) for the best probe seen, so the result is never worse
    than any point evaluated. Non-finite values count as +inf.
    """
    def safe(x):
        try:
            v = f(x)
        except (ArithmeticError, ValueError):
            return math.inf
        return v if math.isfinite(v) else math.inf

    best_x, best_f = None, math.inf
    a, b = lo, hi
    x1 = b - INV_PHI * (b - a)
    x2 = a + INV_PHI * (b - a)
    f1, f2 = safe(x1), safe(x2)
    for x, v in ((x1, f1), (x2, f2)):
        if v < best_f:
            best_x, best_f = x, v
    for _ in range(maxiter):
        if b - a <= tol * max(1.0, abs(a) + abs(b)):
            break
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - INV_PHI * (b - a)
            f1 = safe(x1)
            if f1 < best_f:
                best_x, best_f = x1, f1
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + INV_PHI * (b - a)
            f2 = safe(x2)
            if f2 < best_f:
                best_x, best_f = x2, f2
    for x in (lo, hi):
        v = safe(x)
        if v < best_f:
            best_x, best_f = x, v
    if best_x is None:
        best_x = 0.5 * (lo + hi)
    return best_x, best_f


def golden_min_vec(f, lo: np.ndarray, hi: np.ndarray, iters: int = 80):
    """Vectorized golden-section search: f maps an array of probes to an array of values.

    Each coordinate is an independent 1-D problem on [lo[i], hi[i]].
    Returns (x, value) arrays holding the best probe per coordinate.
    """
    a = np.array(lo, dtype=float)
    b = np.array(hi, dtype=float)

    def safe(x):
        with np.errstate(all="ignore"):
            v = np.asarray(f(x), dtype=float)
        return np.where(np.isfinite(v), v, np.inf)

    x1 = b - INV_PHI * (b - a)
    x2 = a + INV_PHI * (b - a)
    f1, f2 = safe(x1), safe(x2)
    best_x = np.where(f1 <= f2, x1, x2)
    best_f = np.minimum(f1, f2)
    for _ in range(iters):
        left = f1 <= f2
        b = np.where(left, x2, b)
        a = np.where(left, a, x1)
        nx1 = np.where(left, b - INV_PHI * (b - a), x2)
        nx2 = np.where(left, x1, a + INV_PHI * (b - a))
        probe = np.where(left, nx1, nx2)
        fp = safe(probe)
        nf1 = np.where(left, fp, f2)
        nf2 = np.where(left, f1, fp)
        x1, x2, f1, f2 = nx1, nx2, nf1, nf2
        better = fp < best_f
        best_x = np.where(better, probe, best_x)
        best_f = np.where(better, fp, best_f)
    return best_x, best_f


def ternary_min(f, lo: float, hi: float, tol: float = 1e-12, maxiter: int = 300):
    """Ternary search for the minimum of a convex function on [lo, hi]."""
    a, b = lo, hi
    for _ in range(maxiter):
        if b - a <= tol * max(1.0, abs(a) + abs(b)):
            break
        m1 = a + (b - a) / 3.0
        m2 = b - (b - a) / 3.0
        if f(m1) <= f(m2):
            b = m2
        else:
            a = m1
    x = 0.5 * (a + b)
    candidates = [(f(x), x), (f(lo), lo), (f(hi), hi)]
    v, x = min(candidates)
    return x, v
