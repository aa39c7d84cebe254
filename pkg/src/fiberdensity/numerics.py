"""Small shared numerical routines: golden-section search and bisection."""

from __future__ import annotations

import math

_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


def golden_minimize(fun, a: float, b: float, tol: float, max_iter: int = 200):
    """Golden-section minimum of a unimodal function on [a, b].

    Returns (argmin, min value).  Robust for V-shaped objectives where
    derivative-based methods stall.
    """
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = fun(c), fun(d)
    for _ in range(max_iter):
        if b - a <= tol:
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = fun(d)
    if fc < fd:
        return c, fc
    return d, fd


def bisect_root(fun, a: float, b: float, fa: float, tol: float, max_iter: int = 200) -> float:
    """Root of fun on [a, b] given a sign change; fa is fun(a)."""
    for _ in range(max_iter):
        if b - a <= tol:
            break
        m = 0.5 * (a + b)
        fm = fun(m)
        if fm == 0.0:
            return m
        if (fa < 0.0) == (fm < 0.0):
            a, fa = m, fm
        else:
            b = m
    return 0.5 * (a + b)


def loglog_slope(xs, ys) -> float:
    """Least-squares slope of log(y) against log(x)."""
    import numpy as np

    lx = np.log(np.asarray(xs, dtype=float))
    ly = np.log(np.asarray(ys, dtype=float))
    return float(np.polyfit(lx, ly, 1)[0])
