"""Density-at-infinity estimators and limit extrapolation.

Three independent routes to the same number:

* ``sphere_count_density`` (n = 2): half the certified intersection count of
  the fiber with growing circles, exact whenever the scan certifies itself.
* ``sphere_coarea_density`` / ``ball_coarea_density``: Monte Carlo slab
  estimators weighting retained draws by the (tangential) gradient norm and
  normalizing by the reference sphere/ball measure.
* ``inversion_density``: the fiber is pushed through the inversion map in
  closed form and its density at the origin is read off shrinking circles.

``extrapolate_limit`` fits value(r) = theta + c * r^(-alpha) on the reliable
tail of a curve and reports the limit with fit diagnostics.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .fibers import circle_fiber_points
from .geometry import invert_fiber_polynomial, uniform_ball_sample, uniform_sphere_sample
from .numerics import golden_minimize
from .polynomials import Polynomial
from .streams import ensure_generator

__all__ = [
    "DensitySample",
    "DensityCurve",
    "DensityEstimate",
    "EstimationError",
    "sphere_area",
    "ball_volume",
    "sphere_count_density",
    "sphere_coarea_density",
    "ball_coarea_density",
    "coarea_density_curve",
    "density_at_origin",
    "inversion_density",
    "extrapolate_limit",
]

METHODS = ("sphere_count", "sphere_coarea", "ball_coarea", "inversion")


class EstimationError(RuntimeError):
    """A Monte Carlo estimator retained no draws (slab too narrow)."""


@dataclass(frozen=True)
class DensitySample:
    r: float
    value: float
    stderr: float
    reliable: bool


@dataclass
class DensityCurve:
    """Per-radius density estimates for one fiber level and method."""

    t: float
    method: str
    samples: list[DensitySample]

    def radii(self) -> np.ndarray:
        return np.array([s.r for s in self.samples])

    def values(self) -> np.ndarray:
        return np.array([s.value for s in self.samples])


@dataclass(frozen=True)
class DensityEstimate:
    """Extrapolated limit of a density curve.

    ``alpha`` is +inf for exactly constant (count-based) tails and NaN when
    the power fit was rejected and the widest-radius value returned instead.
    """

    theta: float
    c: float
    alpha: float
    fit_residual: float
    n_points_used: int
    accepted: bool = True
    note: str = ""


def sphere_area(k: int, r: float) -> float:
    """k-dimensional measure of the k-sphere of radius r; vol_0 = 2 points."""
    if k < 0:
        raise ValueError("dimension must be >= 0")
    return 2.0 * math.pi ** ((k + 1) / 2.0) / math.gamma((k + 1) / 2.0) * r**k


def ball_volume(k: int, r: float) -> float:
    """k-dimensional volume of the k-ball of radius r; vol_0 = 1."""
    if k < 0:
        raise ValueError("dimension must be >= 0")
    return math.pi ** (k / 2.0) / math.gamma(k / 2.0 + 1.0) * r**k


def _check_radii(radii) -> np.ndarray:
    radii = np.asarray(radii, dtype=float)
    if radii.ndim != 1 or radii.size == 0:
        raise ValueError("radii must be a non-empty 1-d sequence")
    if np.any(radii <= 0) or np.any(np.diff(radii) <= 0):
        raise ValueError("radii must be positive and strictly increasing")
    return radii


def default_radii(r0: float = 8.0, count: int = 6) -> list[float]:
    """Geometric radius schedule r0 * 2^j; geometric spacing conditions the tail fit."""
    return [r0 * 2.0**j for j in range(count)]


# -- count-based (n = 2) -------------------------------------------------------


def sphere_count_density(f: Polynomial, t: float, radii, resolution: int = 4096) -> DensityCurve:
    """Half the circle intersection count per radius; exact and deterministic.

    A sample is reliable iff the scan certified completeness at that radius.
    """
    if f.nvars != 2:
        raise ValueError("sphere_count_density requires a 2-variable polynomial")
    radii = _check_radii(radii)
    samples = []
    for r in radii:
        fps = circle_fiber_points(f, t, float(r), resolution=resolution)
        samples.append(DensitySample(r=float(r), value=len(fps) / 2.0, stderr=0.0, reliable=fps.complete))
    return DensityCurve(t=float(t), method="sphere_count", samples=samples)


# -- co-area Monte Carlo -------------------------------------------------------


def _coarea_estimate(
    f: Polynomial,
    t: float,
    r: float,
    delta,
    count: int,
    rng,
    ball: bool,
    min_retained: int,
):
    """Shared slab estimator.  Returns (value, stderr, reliable, delta, retained)."""
    n = f.nvars
    if ball:
        xs = uniform_ball_sample(n, r, count, rng)
    else:
        xs = uniform_sphere_sample(n, r, count, rng).points
    fv = f.eval_many(xs)
    grad_cols = np.column_stack([g.eval_many(xs) for g in f.gradient()])
    grad_norms = np.linalg.norm(grad_cols, axis=1)
    if ball:
        weight = grad_norms
    else:
        norms = np.linalg.norm(xs, axis=1)
        radial = np.einsum("ij,ij->i", xs, grad_cols) / norms
        weight = np.sqrt(np.maximum(grad_norms**2 - radial**2, 0.0))

    dev = np.abs(fv - t)
    if delta is None:
        # widen the slab until enough draws are retained; the draw itself is
        # delta-independent so no resampling is needed
        d = 0.05 * (1.0 + abs(t))
        retained = int(np.count_nonzero(dev < d))
        doublings = 0
        while retained < min_retained and doublings < 8:
            d *= 2.0
            doublings += 1
            retained = int(np.count_nonzero(dev < d))
    else:
        d = float(delta)
        retained = int(np.count_nonzero(dev < d))
    if retained == 0:
        raise EstimationError(f"no draws retained in the slab |f - {t}| < {d} at r = {r}")

    mask = dev < d
    q = np.where(mask, weight, 0.0)
    if ball:
        scale = ball_volume(n, r) / (2.0 * d * ball_volume(n - 1, r))
    else:
        scale = sphere_area(n - 1, r) / (2.0 * d * sphere_area(n - 2, r))
    value = scale * float(np.mean(q))
    stderr = scale * float(np.std(q, ddof=1)) / math.sqrt(count)
    return value, stderr, retained >= min_retained, d, retained


def sphere_coarea_density(
    f: Polynomial,
    t: float,
    r: float,
    delta: float | None = None,
    count: int = 10**6,
    stream=None,
    min_retained: int = 1000,
) -> tuple[float, float]:
    """Co-area slab estimate of the fiber density on the r-sphere.

    Estimates vol_{n-2}(fiber on the sphere) as the sphere measure times the
    mean of 1{|f - t| < delta} * ||tangential grad f|| / (2 delta), then
    divides by the measure of the reference (n-2)-sphere of the same radius.
    ``delta=None`` starts at 0.05 * (1 + |t|) and doubles until at least
    ``min_retained`` draws fall in the slab.
    """
    if f.nvars < 2:
        raise ValueError("sphere_coarea_density requires nvars >= 2")
    rng = ensure_generator(stream, "sphere_coarea")
    value, stderr, _, _, _ = _coarea_estimate(f, t, r, delta, count, rng, ball=False, min_retained=min_retained)
    return value, stderr


def ball_coarea_density(
    f: Polynomial,
    t: float,
    r: float,
    delta: float | None = None,
    count: int = 10**6,
    stream=None,
    min_retained: int = 1000,
) -> tuple[float, float]:
    """Ball analogue of :func:`sphere_coarea_density` with the full gradient norm."""
    if f.nvars < 2:
        raise ValueError("ball_coarea_density requires nvars >= 2")
    rng = ensure_generator(stream, "ball_coarea")
    value, stderr, _, _, _ = _coarea_estimate(f, t, r, delta, count, rng, ball=True, min_retained=min_retained)
    return value, stderr


def coarea_density_curve(
    f: Polynomial,
    t: float,
    radii,
    kind: str = "ball_coarea",
    count: int = 10**6,
    stream=None,
    min_retained: int = 1000,
) -> DensityCurve:
    """Assemble a co-area DensityCurve over a radius schedule."""
    if kind not in ("ball_coarea", "sphere_coarea"):
        raise ValueError(f"kind must be ball_coarea or sphere_coarea, got {kind!r}")
    radii = _check_radii(radii)
    rng_root = stream
    samples = []
    for i, r in enumerate(radii):
        rng = ensure_generator(rng_root, kind, i) if not isinstance(rng_root, np.random.Generator) else rng_root
        value, stderr, reliable, _, _ = _coarea_estimate(
            f, t, float(r), None, count, rng, ball=(kind == "ball_coarea"), min_retained=min_retained
        )
        samples.append(DensitySample(r=float(r), value=value, stderr=stderr, reliable=reliable))
    return DensityCurve(t=float(t), method=kind, samples=samples)


# -- density at the origin and inversion route ---------------------------------


def density_at_origin(
    g: Polynomial,
    rhos,
    resolution: int = 4096,
    count: int = 10**5,
    stream=None,
) -> DensityCurve:
    """Density of {g = 0} at the origin along shrinking radii.

    For n = 2 each radius contributes half the circle intersection count;
    for n >= 3 a sphere co-area estimate of the level-0 slice is used.
    Radii must decrease toward 0.  If g does not vanish at the origin the
    density is zero; the curve is still returned, with a warning.
    """
    rhos = np.asarray(rhos, dtype=float)
    if rhos.ndim != 1 or rhos.size == 0:
        raise ValueError("rhos must be a non-empty 1-d sequence")
    if np.any(rhos <= 0) or np.any(np.diff(rhos) >= 0):
        raise ValueError("rhos must be positive and strictly decreasing")
    if g.eval(np.zeros(g.nvars)) != 0.0:
        warnings.warn("polynomial does not vanish at the origin; density there is zero", stacklevel=2)
    samples = []
    for i, rho in enumerate(rhos):
        if g.nvars == 2:
            fps = circle_fiber_points(g, 0.0, float(rho), resolution=resolution)
            samples.append(DensitySample(r=float(rho), value=len(fps) / 2.0, stderr=0.0, reliable=fps.complete))
        else:
            rng = ensure_generator(stream, "origin", i)
            value, stderr, reliable, _, _ = _coarea_estimate(
                g, 0.0, float(rho), None, count, rng, ball=False, min_retained=1000
            )
            samples.append(DensitySample(r=float(rho), value=value, stderr=stderr, reliable=reliable))
    return DensityCurve(t=0.0, method="inversion", samples=samples)


def inversion_density(
    f: Polynomial,
    t: float,
    radii,
    resolution: int = 4096,
    count: int = 10**5,
    stream=None,
) -> DensityCurve:
    """Density at infinity through the inversion map.

    Builds the inverted-fiber polynomial once, estimates its density at the
    origin at rho = 1/r, and reindexes the curve by the original radii.  For
    n = 2 this reproduces the sphere count values exactly, point for point.
    """
    radii = _check_radii(radii)
    g = invert_fiber_polynomial(f, t)
    origin_curve = density_at_origin(g, 1.0 / radii, resolution=resolution, count=count, stream=stream)
    by_rho = {s.r: s for s in origin_curve.samples}
    samples = [
        DensitySample(r=float(r), value=by_rho[1.0 / r].value, stderr=by_rho[1.0 / r].stderr,
                      reliable=by_rho[1.0 / r].reliable)
        for r in radii
    ]
    return DensityCurve(t=float(t), method="inversion", samples=samples)


# -- limit extrapolation --------------------------------------------------------


def _power_fit(xs: np.ndarray, vs: np.ndarray, ws: np.ndarray):
    """Weighted least squares of v = theta + c * x^(-alpha); returns (theta, c, alpha, sse)."""

    def solve(alpha: float):
        basis = np.column_stack((np.ones_like(xs), xs**-alpha))
        bw = basis * ws[:, None]
        vw = vs * ws
        coef, *_ = np.linalg.lstsq(bw, vw, rcond=None)
        resid = basis @ coef - vs
        return coef, float(np.sum((resid * ws) ** 2))

    grid = np.geomspace(0.05, 8.0, 161)
    sses = np.array([solve(a)[1] for a in grid])
    k = int(np.argmin(sses))
    lo = grid[max(k - 1, 0)]
    hi = grid[min(k + 1, grid.size - 1)]
    alpha, _ = golden_minimize(lambda a: solve(a)[1], lo, hi, 1e-9 * (hi - lo) + 1e-12)
    coef, sse = solve(alpha)
    return float(coef[0]), float(coef[1]), float(alpha), sse


def extrapolate_limit(curve: DensityCurve) -> DensityEstimate:
    """Extrapolate the large-radius limit of a density curve.

    Uses the reliable samples only (>= 3 required).  Exactly equal last two
    values short-circuit to that value with alpha = +inf (count-based curves
    stabilize exactly).  A fit is rejected, and the widest-radius value
    returned with inflated uncertainty, when the tail is noisier than its
    stderr budget or the fitted limit leaves the band of the last two samples.
    """
    reliable = [s for s in curve.samples if s.reliable]
    if len(reliable) < 3:
        raise ValueError(f"extrapolation needs >= 3 reliable samples, have {len(reliable)}")

    rs = np.array([s.r for s in reliable])
    vs = np.array([s.value for s in reliable])
    es = np.array([s.stderr for s in reliable])
    # curves indexed by shrinking rho extrapolate toward rho -> 0; flip to an
    # increasing axis so the model tail r^(-alpha) decays in both cases
    xs = rs if rs[0] < rs[-1] else 1.0 / rs

    if vs[-1] == vs[-2]:
        return DensityEstimate(
            theta=float(vs[-1]), c=0.0, alpha=math.inf, fit_residual=0.0,
            n_points_used=len(reliable), accepted=True,
        )

    ws = np.where(es > 0, 1.0 / np.where(es > 0, es, 1.0), 1.0)
    theta, c, alpha, _ = _power_fit(xs, vs, ws)
    resid = vs - (theta + c * xs**-alpha)
    fit_residual = float(np.sqrt(np.mean(resid**2)))

    max_err = float(np.max(es))
    lo = min(vs[-1], vs[-2]) - 3.0 * max_err - 1e-12
    hi = max(vs[-1], vs[-2]) + 3.0 * max_err + 1e-12
    noisy = False
    if np.any(es > 0):
        scaled = resid[es > 0] / es[es > 0]
        noisy = float(np.sum(scaled**2)) > 9.0 * max(len(reliable) - 3, 1)
    if noisy or not (lo <= theta <= hi):
        spread = float(np.max(np.abs(vs[-2:] - vs[-1])))
        return DensityEstimate(
            theta=float(vs[-1]),
            c=0.0,
            alpha=math.nan,
            fit_residual=max(fit_residual, spread, max_err),
            n_points_used=len(reliable),
            accepted=False,
            note="tail rejected by fit diagnostics; widest-radius value with inflated uncertainty",
        )
    return DensityEstimate(
        theta=theta, c=c, alpha=alpha, fit_residual=fit_residual,
        n_points_used=len(reliable), accepted=True,
    )
