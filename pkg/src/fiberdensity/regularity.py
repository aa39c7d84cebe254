"""Regularity of the density profile and the rugosity inequality.

``density_profile`` assembles t -> theta(fiber at infinity) over a grid;
``lipschitz_report`` measures adjacent-pair moduli, excises grid cells around
detected asymptotic critical values, and confirms discontinuities by grid
refinement.  The outcome is necessarily empirical: the report distinguishes
"consistent with locally Lipschitz" from "discontinuity detected", nothing
stronger.

``rugosity_check`` samples the stratified vector field v = (1, v_tail) with
v_tail the inversion Jacobian applied to grad f / ||grad f||^2, pairs points
z = (f(x), invert(x)) on the big stratum with nearby axis points y = (t_y, 0),
and reports the ratios ||v(z) - v(y)|| / ||z - y|| whose boundedness is the
(w)-regularity evidence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import critical
from .density import (
    DensityCurve,
    DensityEstimate,
    coarea_density_curve,
    extrapolate_limit,
    inversion_density,
    sphere_count_density,
)
from .fibers import circle_fiber_points, newton_project
from .geometry import apply_inversion_jacobian, invert, uniform_sphere_sample
from .polynomials import Polynomial
from .streams import ensure_generator

__all__ = [
    "ProfilePoint",
    "Discontinuity",
    "LipschitzReport",
    "RugosityPair",
    "RugosityReport",
    "MarginError",
    "density_profile",
    "profile_estimator",
    "lipschitz_report",
    "rugosity_field",
    "rugosity_check",
]


class MarginError(ValueError):
    """The requested interval sits too close to a detected candidate value."""


@dataclass
class ProfilePoint:
    t: float
    estimate: DensityEstimate
    curve: DensityCurve | None = None
    failed: bool = False
    note: str = ""


def profile_estimator(
    f: Polynomial,
    method: str = "sphere_count",
    radii=None,
    budget: int = 10**5,
    stream=None,
    resolution: int = 4096,
):
    """Callable t -> (DensityEstimate, DensityCurve) for one estimator setup."""
    from .density import default_radii

    radii = list(radii) if radii is not None else default_radii()

    def estimate(t: float):
        if method == "sphere_count":
            curve = sphere_count_density(f, t, radii, resolution=resolution)
        elif method == "inversion":
            curve = inversion_density(f, t, radii, resolution=resolution, count=budget, stream=stream)
        elif method in ("ball_coarea", "sphere_coarea"):
            curve = coarea_density_curve(f, t, radii, kind=method, count=budget, stream=stream)
        else:
            raise ValueError(f"unknown method {method!r}")
        return extrapolate_limit(curve), curve

    return estimate


def density_profile(
    f: Polynomial,
    t_grid,
    method: str = "sphere_count",
    radii=None,
    budget: int = 10**5,
    stream=None,
    resolution: int = 4096,
) -> list[ProfilePoint]:
    """One extrapolated density estimate per grid level.

    A failing level is flagged on its ProfilePoint rather than aborting the
    profile.  Bounded fibers come out as theta = 0 (all scans empty).
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or t_grid.size == 0:
        raise ValueError("t_grid must be a non-empty 1-d sequence")
    if np.any(np.diff(t_grid) <= 0):
        raise ValueError("t_grid must be strictly increasing")
    estimate = profile_estimator(f, method=method, radii=radii, budget=budget, stream=stream, resolution=resolution)
    profile = []
    for t in t_grid:
        try:
            est, curve = estimate(float(t))
            profile.append(ProfilePoint(t=float(t), estimate=est, curve=curve))
        except Exception as exc:  # noqa: BLE001 - a failed level is data, not fatal
            profile.append(
                ProfilePoint(
                    t=float(t),
                    estimate=DensityEstimate(
                        theta=math.nan, c=0.0, alpha=math.nan, fit_residual=math.inf,
                        n_points_used=0, accepted=False, note=str(exc),
                    ),
                    failed=True,
                    note=str(exc),
                )
            )
    return profile


@dataclass(frozen=True)
class Discontinuity:
    location: float
    jump_size: float
    nearest_candidate: float | None


@dataclass
class LipschitzReport:
    t_grid: np.ndarray
    thetas: np.ndarray
    moduli: np.ndarray  # |dtheta| / |dt| per adjacent pair
    interval_max_moduli: list[tuple[tuple[float, float], float]]  # candidate-free runs
    discontinuities: list[Discontinuity]
    jump_threshold: float

    def max_modulus(self) -> float:
        vals = [m for _, m in self.interval_max_moduli]
        return max(vals) if vals else 0.0


def lipschitz_report(
    profile: list[ProfilePoint],
    estimator,
    jump_threshold: float = 0.5,
    candidates=(),
    refine_factor: int = 4,
) -> LipschitzReport:
    """Adjacent-pair moduli plus refinement-confirmed discontinuities.

    ``estimator`` is the callable used to re-estimate theta at the refined
    levels (as returned by :func:`profile_estimator`).  Grid cells containing
    a candidate value are excised before the per-interval maxima; a cell
    whose jump survives ``refine_factor``-fold refinement is reported as a
    discontinuity, with adjacent confirmed cells merged into one event.
    """
    ok = [p for p in profile if not p.failed]
    if len(ok) < 3:
        raise ValueError("lipschitz_report needs at least 3 successful grid points")
    ts = np.array([p.t for p in ok])
    thetas = np.array([p.estimate.theta for p in ok])
    moduli = np.abs(np.diff(thetas)) / np.diff(ts)

    cand_values = [float(c) for c in candidates]
    cell_has_candidate = [
        any(ts[i] <= c <= ts[i + 1] for c in cand_values) for i in range(len(ts) - 1)
    ]

    # candidate-free maximal runs of cells
    interval_max: list[tuple[tuple[float, float], float]] = []
    i = 0
    while i < len(moduli):
        if cell_has_candidate[i]:
            i += 1
            continue
        j = i
        while j + 1 < len(moduli) and not cell_has_candidate[j + 1]:
            j += 1
        interval_max.append(((float(ts[i]), float(ts[j + 1])), float(np.max(moduli[i : j + 1]))))
        i = j + 1

    confirmed: list[int] = []
    for i in range(len(moduli)):
        if abs(thetas[i + 1] - thetas[i]) <= jump_threshold:
            continue
        # refine the cell and see whether the jump localizes below threshold
        fine = np.linspace(ts[i], ts[i + 1], refine_factor + 1)
        fine_theta = [thetas[i]]
        for t in fine[1:-1]:
            est, _ = estimator(float(t))
            fine_theta.append(est.theta)
        fine_theta.append(thetas[i + 1])
        max_fine_jump = float(np.max(np.abs(np.diff(fine_theta))))
        if max_fine_jump > jump_threshold:
            confirmed.append(i)

    discontinuities: list[Discontinuity] = []
    for group in _merge_adjacent(confirmed):
        if len(group) > 1:
            location = float(ts[group[0] + 1])  # shared grid point of the merged cells
        else:
            location = float(0.5 * (ts[group[0]] + ts[group[0] + 1]))
        jump = float(max(abs(thetas[i + 1] - thetas[i]) for i in group))
        nearest = min(cand_values, key=lambda c: abs(c - location)) if cand_values else None
        discontinuities.append(Discontinuity(location=location, jump_size=jump, nearest_candidate=nearest))

    return LipschitzReport(
        t_grid=ts,
        thetas=thetas,
        moduli=moduli,
        interval_max_moduli=interval_max,
        discontinuities=discontinuities,
        jump_threshold=jump_threshold,
    )


def _merge_adjacent(indices: list[int]) -> list[list[int]]:
    groups = []
    for i in indices:
        if groups and i == groups[-1][-1] + 1:
            groups[-1].append(i)
        else:
            groups.append([i])
    return groups


def rugosity_field(f: Polynomial, x):
    """Stratified vector field tail at a fiber point.

    Returns (v_tail, (t, u)) with t = f(x), u = invert(x) and v_tail the
    inversion Jacobian applied to grad f / ||grad f||^2 through the rank-1
    form.  The full field is v = (1, v_tail) on the big stratum and (1, 0)
    on the axis.
    """
    x = np.asarray(x, dtype=float)
    grad = np.array([g.eval(x) for g in f.gradient()])
    gn2 = float(np.dot(grad, grad))
    if gn2 == 0.0:
        raise ValueError("gradient vanishes; the field is undefined here")
    v_tail = apply_inversion_jacobian(x, grad / gn2)
    return v_tail, (float(f.eval(x)), invert(x))


@dataclass(frozen=True)
class RugosityPair:
    r: float
    t_z: float
    t_y: float
    u_norm: float
    dist: float
    ratio: float
    conformal_product: float = 1.0  # ||v_tail|| * ||x||^2 * ||grad f||, exactly 1 up to rounding


@dataclass
class RugosityReport:
    interval: tuple[float, float]
    pairs: list[RugosityPair]
    max_ratio: float
    fitted_c: float  # max over radius shells of the within-shell 95th percentile
    per_radius_max: list[tuple[float, float]]
    eps1_value: float
    forced: bool = False


def rugosity_check(
    f: Polynomial,
    interval: tuple[float, float],
    radii,
    pairs_per_radius: int = 150,
    stream=None,
    candidates=(),
    margin_bins: int = 10,
    bin_width: float = 0.02,
    eps1_value: float | None = None,
    force: bool = False,
    resolution: int = 4096,
) -> RugosityReport:
    """Sample rugosity ratios over an interval of regular values.

    Per radius, ``pairs_per_radius`` fiber levels are drawn uniformly in the
    interval; every intersection point x contributes two pairs: one against
    its own axis projection (t_z, 0), where ||z - y|| = ||u|| exactly, and
    one against a nearby axis point with t_y drawn uniformly within 1/r of
    t_z (clipped to the interval).  Refuses intervals within ``margin_bins``
    bin widths of a known candidate unless ``force`` is set.
    """
    a, b = float(interval[0]), float(interval[1])
    if not a < b:
        raise ValueError("interval must satisfy a < b")
    margin = margin_bins * bin_width
    offending = [c for c in candidates if a - margin <= float(c) <= b + margin]
    if offending and not force:
        raise MarginError(
            f"interval ({a}, {b}) is within {margin} of candidate value(s) {offending}; "
            "ratios degrade near asymptotic critical values (rerun with force=True to observe)"
        )

    if eps1_value is None:
        probe = np.linspace(a, b, 5)
        eps1_value = 1.1 * max(critical.sigma1(f, float(t)) for t in probe) if f.nvars == 2 else 1.1
    usable_radii = [float(r) for r in radii if r > eps1_value]
    if not usable_radii:
        raise ValueError(f"all radii lie inside the eps1 envelope ({eps1_value:.3g})")

    pairs: list[RugosityPair] = []
    per_radius_max: list[tuple[float, float]] = []
    shell_ratios: list[np.ndarray] = []
    for i, r in enumerate(usable_radii):
        rng = ensure_generator(stream, "rugosity", i)
        ratios = []
        for _ in range(pairs_per_radius):
            t_z = rng.uniform(a, b)
            for x in _fiber_points_any_dim(f, t_z, r, rng, resolution):
                try:
                    v_tail, (tz, u) = rugosity_field(f, x)
                except ValueError:
                    continue
                vt = float(np.linalg.norm(v_tail))
                un = float(np.linalg.norm(u))
                gn = float(np.linalg.norm([g.eval(x) for g in f.gradient()]))
                prod = vt * float(np.dot(x, x)) * gn
                # pair against the axis projection of z: the binding distance
                ratios.append(
                    RugosityPair(r=r, t_z=tz, t_y=tz, u_norm=un, dist=un, ratio=vt / un, conformal_product=prod)
                )
                # and against a nearby random axis point
                w = 1.0 / r
                t_y = rng.uniform(max(a, tz - w), min(b, tz + w))
                dist = math.hypot(tz - t_y, un)
                ratios.append(
                    RugosityPair(
                        r=r, t_z=tz, t_y=float(t_y), u_norm=un, dist=dist, ratio=vt / dist, conformal_product=prod
                    )
                )
        pairs.extend(ratios)
        values = np.array([p.ratio for p in ratios]) if ratios else np.array([0.0])
        per_radius_max.append((r, float(np.max(values))))
        shell_ratios.append(values)

    if not pairs:
        raise ValueError("no fiber points found on any sampled sphere in this interval")
    max_ratio = max(p.ratio for p in pairs)
    fitted_c = max(float(np.percentile(v, 95)) for v in shell_ratios)
    return RugosityReport(
        interval=(a, b),
        pairs=pairs,
        max_ratio=max_ratio,
        fitted_c=fitted_c,
        per_radius_max=per_radius_max,
        eps1_value=float(eps1_value),
        forced=bool(offending),
    )


def _fiber_points_any_dim(f: Polynomial, t: float, r: float, rng, resolution: int):
    """Fiber-sphere intersection points: exact scan for n = 2, projected seeds otherwise."""
    if f.nvars == 2:
        return [p.x for p in circle_fiber_points(f, t, r, resolution=resolution).points]
    seeds = uniform_sphere_sample(f.nvars, r, 8, rng).points
    out = []
    for s in seeds:
        try:
            out.append(newton_project(f, t, r, s))
        except Exception:  # noqa: BLE001 - failed seeds are simply skipped
            continue
    return out
