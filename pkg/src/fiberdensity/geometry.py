"""Inversion through the unit sphere and related geometric primitives.

The map ``invert(x) = x / ||x||^2`` is a conformal involution exchanging
neighborhoods of infinity and of the origin.  Its Jacobian is the scaled
Householder reflection ``(I - 2 x_hat x_hat^T) / ||x||^2``, so every singular
value equals ``1 / ||x||^2`` exactly; hot loops apply it through the rank-1
form instead of materializing the matrix.

``invert_fiber_polynomial`` produces the exact polynomial whose zero set
(away from the origin) is the image under inversion of a fiber ``f = t``,
built with exact term arithmetic so that density estimates read off it are
independent of direct fiber sampling.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .polynomials import Polynomial
from .streams import ensure_generator

__all__ = [
    "invert",
    "inversion_jacobian",
    "apply_inversion_jacobian",
    "invert_fiber_polynomial",
    "uniform_sphere_sample",
    "uniform_ball_sample",
    "circle_grid",
    "tangent_projection_norm",
    "SphereSample",
]


def invert(x) -> np.ndarray:
    """x / ||x||^2.  Involution: invert(invert(x)) == x for x != 0."""
    x = np.asarray(x, dtype=float)
    n2 = float(np.dot(x, x))
    if n2 == 0.0:
        raise ValueError("inversion is undefined at the origin")
    return x / n2


def inversion_jacobian(x) -> np.ndarray:
    """Exact Jacobian matrix of :func:`invert` at x != 0.

    Entry (i, j) is (||x||^2 * delta_ij - 2 x_i x_j) / ||x||^4.
    """
    x = np.asarray(x, dtype=float)
    n2 = float(np.dot(x, x))
    if n2 == 0.0:
        raise ValueError("inversion is undefined at the origin")
    n = x.size
    return (n2 * np.eye(n) - 2.0 * np.outer(x, x)) / (n2 * n2)


def apply_inversion_jacobian(x, v) -> np.ndarray:
    """Jacobian of invert at x applied to v, via the rank-1 form.

    Equals (v - 2 x_hat <x_hat, v>) / ||x||^2; avoids building the matrix.
    """
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    n2 = float(np.dot(x, x))
    if n2 == 0.0:
        raise ValueError("inversion is undefined at the origin")
    return (v - (2.0 * np.dot(x, v) / n2) * x) / n2


def invert_fiber_polynomial(f: Polynomial, t: float) -> Polynomial:
    """Polynomial G with G = 0 describing the inverted fiber {f = t}.

    For f of degree d with terms c_a x^a,

        G(u) = sum_a c_a u^a (||u||^2)^(d - |a|)  -  t (||u||^2)^d,

    which satisfies G(invert(x)) = (f(x) - t) / ||x||^(2d) identically, so
    the zero set of G minus the origin is the image of the fiber under
    inversion.  Built by exact polynomial arithmetic.
    """
    d = f.degree
    if d < 1:
        raise ValueError("fiber inversion requires a non-constant polynomial")
    d = int(d)
    n = f.nvars
    norm2 = Polynomial(n, {tuple(2 if j == i else 0 for j in range(n)): 1.0 for i in range(n)})
    powers = [Polynomial.constant(n, 1.0)]
    for _ in range(d):
        powers.append(powers[-1] * norm2)
    g = Polynomial.zero(n)
    for coeff, exps in f.terms:
        g = g + Polynomial.monomial(n, exps, coeff) * powers[d - sum(exps)]
    return g - float(t) * powers[d]


@dataclass(frozen=True)
class SphereSample:
    """Uniform sample of a centered sphere of the given radius."""

    radius: float
    points: np.ndarray  # shape (N, n), each row of norm `radius`
    stream_id: int | None = None


def uniform_sphere_sample(n: int, r: float, count: int, stream) -> SphereSample:
    """``count`` points uniform on the sphere of radius r in R^n.

    Gaussian directions, normalized; deterministic per stream.
    """
    if n < 2:
        raise ValueError("sphere sampling requires dimension >= 2")
    if r <= 0:
        raise ValueError("radius must be positive")
    if count < 1:
        raise ValueError("count must be >= 1")
    stream_id = int(stream) if isinstance(stream, (int, np.integer)) else None
    rng = ensure_generator(stream, "sphere")
    pts = rng.standard_normal((count, n))
    norms = np.linalg.norm(pts, axis=1)
    # a resample of exact zero rows is astronomically unlikely; guard anyway
    bad = norms == 0.0
    while np.any(bad):
        pts[bad] = rng.standard_normal((int(bad.sum()), n))
        norms = np.linalg.norm(pts, axis=1)
        bad = norms == 0.0
    return SphereSample(radius=float(r), points=pts * (r / norms)[:, None], stream_id=stream_id)


def uniform_ball_sample(n: int, r: float, count: int, stream) -> np.ndarray:
    """``count`` points uniform in the closed ball of radius r (cube rejection)."""
    if r <= 0:
        raise ValueError("radius must be positive")
    rng = ensure_generator(stream, "ball")
    out = np.empty((count, n))
    got = 0
    while got < count:
        batch = max(1024, int(2.2 * (count - got)))
        draws = rng.uniform(-r, r, size=(batch, n))
        keep = draws[np.einsum("ij,ij->i", draws, draws) <= r * r]
        take = min(count - got, keep.shape[0])
        out[got : got + take] = keep[:take]
        got += take
    return out


def circle_grid(r: float, resolution: int) -> tuple[np.ndarray, np.ndarray]:
    """Equispaced angles on [0, 2pi) and the matching points of the r-circle."""
    theta = np.arange(resolution) * (2.0 * np.pi / resolution)
    pts = np.column_stack((r * np.cos(theta), r * np.sin(theta)))
    return theta, pts


def tangent_projection_norm(f: Polynomial, x) -> float:
    """Norm of the radial direction projected onto the fiber tangent space.

    Returns ||(I - n_hat n_hat^T)(x / ||x||)|| with n_hat the unit gradient
    of f at x; this is the norm of the gradient of the distance function
    restricted to the fiber of f through x.  Always in [0, 1].
    """
    x = np.asarray(x, dtype=float)
    grad = np.array([g.eval(x) for g in f.gradient()])
    gn = float(np.linalg.norm(grad))
    if gn == 0.0:
        raise ValueError("gradient vanishes; tangent space undefined")
    xn = float(np.linalg.norm(x))
    if xn == 0.0:
        raise ValueError("undefined at the origin")
    radial = x / xn
    normal = grad / gn
    w = radial - normal * float(np.dot(normal, radial))
    return min(1.0, float(np.linalg.norm(w)))
