"""Certified point samples of fiber-sphere intersections.

For n = 2 the intersection of a fiber {f = t} with a circle of radius r is a
finite set of angles; ``circle_fiber_points`` finds them by scanning the sign
of g(theta) = f(r cos theta, r sin theta) - t on an equispaced grid, refining
every sign change by bisection.  The scan certifies itself: grid values that
vanish to rounding are exact roots, near-tangencies (a local minimum of |g|
dipping below tol * max|g| without a sign change) trigger one automatic
re-scan at 4x resolution, and tangent or odd-parity outcomes mark the result
incomplete so density estimators can exclude that radius.

For n >= 3 the module provides slab Monte Carlo draws and a damped Newton
projection onto the two-constraint set {f = t, ||x|| = r}.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import uniform_ball_sample, uniform_sphere_sample
from .numerics import bisect_root, golden_minimize
from .polynomials import Polynomial
from .streams import ensure_generator

__all__ = [
    "FiberPoint",
    "FiberPointSet",
    "SlabSample",
    "ProjectionError",
    "circle_fiber_points",
    "newton_project",
    "slab_sample",
]

ZERO_RTOL = 1e-14  # |g| below this times max|g| counts as an exact grid root
MAX_TANGENCY_PROBES = 64


class ProjectionError(RuntimeError):
    """Newton projection failed to converge or hit a rank-deficient Jacobian."""


@dataclass(frozen=True)
class FiberPoint:
    x: np.ndarray
    f_residual: float
    grad_norm: float
    rabier: float  # ||x|| * ||grad f(x)||
    tangent: bool = False


@dataclass
class FiberPointSet:
    """Intersection points of {f = t} with the sphere of radius r."""

    t: float
    r: float
    points: list[FiberPoint]
    complete: bool
    resolution: int  # grid size of the final scan

    def __len__(self) -> int:
        return len(self.points)

    def rabier_values(self) -> np.ndarray:
        return np.array([p.rabier for p in self.points])


@dataclass
class SlabSample:
    """Draws retained in the slab |f - t| < delta on a sphere or ball."""

    t: float
    r: float
    delta: float
    points: np.ndarray  # (K, n) retained draws
    f_values: np.ndarray
    grad_norms: np.ndarray
    tangential_grad_norms: np.ndarray
    n_total: int
    ball: bool = False


def _make_point(f: Polynomial, grads, t: float, r: float, theta: float, tangent: bool) -> FiberPoint:
    x = np.array([r * math.cos(theta), r * math.sin(theta)])
    grad = np.array([g.eval(x) for g in grads])
    grad_norm = float(np.linalg.norm(grad))
    return FiberPoint(
        x=x,
        f_residual=float(f.eval(x) - t),
        grad_norm=grad_norm,
        rabier=float(np.linalg.norm(x)) * grad_norm,
        tangent=tangent,
    )


def _scan_circle(f: Polynomial, t: float, r: float, resolution: int, tol: float):
    """One scan pass; returns (root list, suspicious, has_tangent, degenerate)."""
    M = resolution
    step = 2.0 * math.pi / M
    theta = np.arange(M) * step
    pts = np.column_stack((r * np.cos(theta), r * np.sin(theta)))
    g = f.eval_many(pts) - t
    gmax = float(np.max(np.abs(g)))
    if gmax == 0.0:
        # f - t vanishes identically on the circle: no isolated intersections
        return [], True, True, True

    def g_at(th: float) -> float:
        return f.eval((r * math.cos(th), r * math.sin(th))) - t

    zero_tol = ZERO_RTOL * gmax
    sign = np.zeros(M, dtype=np.int8)
    sign[g > zero_tol] = 1
    sign[g < -zero_tol] = -1

    roots: list[tuple[float, bool]] = []
    has_tangent = False

    # exact (to rounding) roots at grid points
    for j in np.nonzero(sign == 0)[0]:
        left = sign[(j - 1) % M]
        right = sign[(j + 1) % M]
        if left == 0:
            continue  # head of a zero run already recorded
        if right == 0:
            # zero run: degenerate contact, record once, flagged
            roots.append((theta[j], True))
            has_tangent = True
            continue
        touching = left == right
        roots.append((theta[j], touching))
        has_tangent = has_tangent or touching

    # transverse crossings between consecutive grid points
    for j in range(M):
        k = (j + 1) % M
        if sign[j] * sign[k] == -1:
            a = theta[j]
            b = theta[j] + step
            root = bisect_root(g_at, a, b, float(g[j]), tol)
            roots.append((root, False))

    # near-tangency probes: local minima of |g| with no adjacent crossing or
    # grid zero.  A dip below tol * max|g| is indistinguishable from a double
    # root at working precision: report it once, flagged, and mark the scan.
    absg = np.abs(g)
    suspicious = False
    candidates = []
    for j in range(M):
        jl, jr = (j - 1) % M, (j + 1) % M
        if sign[j] != 0 and sign[jl] == sign[j] == sign[jr]:
            if absg[j] < absg[jl] and absg[j] < absg[jr]:
                candidates.append(j)
    candidates.sort(key=lambda j: absg[j])
    two_pi = 2.0 * math.pi
    for j in candidates[:MAX_TANGENCY_PROBES]:
        lo = theta[j] - step
        hi = theta[j] + step
        th, vmin = golden_minimize(lambda a: abs(g_at(a)), lo, hi, 1e-13)
        if vmin < tol * gmax:
            suspicious = True
            th %= two_pi
            gap = min(
                (min(abs(th - other), two_pi - abs(th - other)) for other, _ in roots),
                default=two_pi,
            )
            if gap > 0.5 * step:
                roots.append((th, True))
                has_tangent = True

    roots.sort(key=lambda item: item[0])
    return roots, suspicious, has_tangent, False


def circle_fiber_points(
    f: Polynomial,
    t: float,
    r: float,
    resolution: int = 4096,
    tol: float = 1e-12,
) -> FiberPointSet:
    """All intersection points of {f = t} with the circle of radius r.

    ``resolution`` is the number of scan angles (>= 16); ``tol`` is both the
    bisection angle tolerance and the relative tangency-suspicion threshold.
    An empty point list is a valid result.  ``complete`` is False when a
    tangency is suspected or found, or the point count is odd, even after the
    automatic 4x re-scan.
    """
    if f.nvars != 2:
        raise ValueError("circle_fiber_points requires a 2-variable polynomial")
    if r <= 0:
        raise ValueError("radius must be positive")
    if resolution < 16:
        raise ValueError("resolution must be >= 16")

    grads = f.gradient()
    roots, suspicious, has_tangent, degenerate = _scan_circle(f, t, r, resolution, tol)
    final_resolution = resolution
    if (suspicious or has_tangent or len(roots) % 2 == 1) and not degenerate:
        final_resolution = 4 * resolution
        roots, suspicious, has_tangent, degenerate = _scan_circle(f, t, r, final_resolution, tol)

    complete = not (suspicious or has_tangent or degenerate or len(roots) % 2 == 1)
    points = [_make_point(f, grads, t, r, theta, tangent) for theta, tangent in roots]
    return FiberPointSet(t=float(t), r=float(r), points=points, complete=complete, resolution=final_resolution)


def newton_project(
    f: Polynomial,
    t: float,
    r: float,
    x0,
    tol: float = 1e-12,
    max_iter: int = 60,
) -> np.ndarray:
    """Project x0 onto {f = t} intersected with the sphere of radius r.

    Damped Newton on the two-constraint system (f(x) - t, ||x||^2 - r^2),
    using the least-norm step for n > 2.  Returns x0 unchanged when it
    already satisfies both constraints.  Raises :class:`ProjectionError`
    on non-convergence or a rank-deficient constraint Jacobian.
    """
    x = np.asarray(x0, dtype=float).copy()
    grads = f.gradient()
    scale = 1.0 + abs(t) + r * r

    def residual(y):
        return np.array([f.eval(y) - t, float(np.dot(y, y)) - r * r])

    F = residual(x)
    if np.linalg.norm(F) <= tol * scale:
        return np.asarray(x0, dtype=float)

    for _ in range(max_iter):
        J = np.vstack([np.array([g.eval(x) for g in grads]), 2.0 * x])
        try:
            if x.size == 2:
                step = np.linalg.solve(J, -F)
            else:
                JJt = J @ J.T
                step = -J.T @ np.linalg.solve(JJt, F)
        except np.linalg.LinAlgError as exc:
            raise ProjectionError(f"rank-deficient constraint Jacobian near {x}") from exc
        norm_F = np.linalg.norm(F)
        lam = 1.0
        for _ in range(40):
            trial = x + lam * step
            F_trial = residual(trial)
            if np.linalg.norm(F_trial) < (1.0 - 0.25 * lam) * norm_F:
                break
            lam *= 0.5
        else:
            raise ProjectionError(f"no descent from {x}; constraints may be inconsistent")
        x, F = trial, F_trial
        if np.linalg.norm(F) <= tol * scale:
            return x
    raise ProjectionError(f"no convergence after {max_iter} iterations (residual {np.linalg.norm(F):.3e})")


def slab_sample(
    f: Polynomial,
    t: float,
    r: float,
    delta: float,
    count: int,
    stream,
    ball: bool = False,
) -> SlabSample:
    """Uniform draws on the r-sphere (or r-ball) retained in |f - t| < delta.

    Retained draws carry f value, gradient norm and the tangential gradient
    norm ||(I - x_hat x_hat^T) grad f||; ``n_total`` counts all draws so
    co-area estimators can normalize by the full sample size.
    """
    if delta <= 0:
        raise ValueError("slab half-width must be positive")
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = ensure_generator(stream, "slab")
    if ball:
        xs = uniform_ball_sample(f.nvars, r, count, rng)
    else:
        xs = uniform_sphere_sample(f.nvars, r, count, rng).points
    fv = f.eval_many(xs)
    grad_cols = np.column_stack([g.eval_many(xs) for g in f.gradient()])
    grad_norms = np.linalg.norm(grad_cols, axis=1)
    norms = np.linalg.norm(xs, axis=1)
    radial = np.where(norms > 0, np.einsum("ij,ij->i", xs, grad_cols) / np.where(norms > 0, norms, 1.0), 0.0)
    tangential = np.sqrt(np.maximum(grad_norms**2 - radial**2, 0.0))
    keep = np.abs(fv - t) < delta
    return SlabSample(
        t=float(t),
        r=float(r),
        delta=float(delta),
        points=xs[keep],
        f_values=fv[keep],
        grad_norms=grad_norms[keep],
        tangential_grad_norms=tangential[keep],
        n_total=count,
        ball=ball,
    )
