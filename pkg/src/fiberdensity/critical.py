"""Detection of asymptotic critical values.

A value y is an asymptotic critical value of f when some sequence of points
escapes to infinity with f -> y while the Rabier quantity nu(x) =
||x|| * ||grad f(x)|| tends to zero.  The detector sweeps nu over growing
spheres, keeps the lower envelope of nu per f-value bin, and reports bins
whose envelope decays in r (log-log slope below a threshold) and ends small.

Thresholds, bin width and the radius schedule are configuration, not theory:
the detector can only ever report candidates with decay evidence, never
certify that a value is *not* asymptotic-critical.  Raw envelopes are kept on
the report so borderline bins can be audited.

The module also computes the two radius/gap functions used by regularity
checks: ``sigma1`` (one plus the largest critical point norm on a fiber) and
``sigma2`` (the smallest Rabier value on the fiber beyond a radius), plus
piecewise-linear envelopes strictly above/below them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .fibers import FiberPointSet, circle_fiber_points
from .geometry import circle_grid, uniform_sphere_sample
from .numerics import golden_minimize, loglog_slope
from .polynomials import Polynomial
from .streams import ensure_generator

__all__ = [
    "RabierField",
    "Witness",
    "AsymptoticCriticalValue",
    "DetectionReport",
    "SigmaEnvelope",
    "rabier_scan",
    "detect_asymptotic_values",
    "fiber_rabier_min",
    "sigma1",
    "sigma2",
    "build_envelopes",
]

_TINY = 1e-300  # floor before taking logs of an exactly-zero envelope


@dataclass
class RabierField:
    """Sampled values of nu = ||x|| * ||grad f|| on one sphere.

    Grid points cover the sphere at the declared resolution; refined local
    minima are appended so narrow dips survive binning.
    """

    r: float
    f_values: np.ndarray
    nu_values: np.ndarray
    points: np.ndarray  # (K, n)
    resolution: int


@dataclass(frozen=True)
class Witness:
    r: float
    x: np.ndarray
    f_value: float
    nu: float


@dataclass
class AsymptoticCriticalValue:
    """A suspected asymptotic critical value with its decay evidence."""

    value: float
    bin_width: float
    decay_slope: float
    final_nu: float
    witnesses: list[Witness]


@dataclass
class DetectionReport:
    """Candidates plus the raw evidence they were drawn from."""

    candidates: list[AsymptoticCriticalValue]
    radii: list[float]
    bin_width: float
    slope_threshold: float
    abs_threshold: float
    global_min_nu: list[float]  # per radius, over the whole sphere
    global_slope: float
    envelope_rows: list[tuple[float, float, float]]  # (r, bin_center, min_nu)


def _nu_at(f: Polynomial, grads, r: float, theta: float):
    x = np.array([r * math.cos(theta), r * math.sin(theta)])
    g = np.array([gi.eval(x) for gi in grads])
    return x, float(np.linalg.norm(x)) * float(np.linalg.norm(g))


def rabier_scan(
    f: Polynomial,
    r: float,
    resolution: int = 4096,
    samples: int = 20000,
    stream=None,
    max_refine: int = 64,
) -> RabierField:
    """Sample nu over the sphere of radius r.

    n = 2: equispaced angular grid; every strict local minimum of nu (the
    lowest ``max_refine`` of them) is refined by golden section to 1e-10 rad
    and appended.  n >= 3: uniform sphere sample with projected-gradient
    refinement of the lowest 0.1 percent.
    """
    if r <= 0:
        raise ValueError("radius must be positive")
    grads = f.gradient()
    if f.nvars == 2:
        theta, pts = circle_grid(r, resolution)
        grad_cols = np.column_stack([g.eval_many(pts) for g in grads])
        nu = np.linalg.norm(pts, axis=1) * np.linalg.norm(grad_cols, axis=1)
        fv = f.eval_many(pts)
        step = 2.0 * math.pi / resolution
        left = np.roll(nu, 1)
        right = np.roll(nu, -1)
        minima = np.nonzero((nu < left) & (nu < right))[0]
        minima = minima[np.argsort(nu[minima])][:max_refine]
        extra_pts, extra_f, extra_nu = [], [], []
        for j in minima:
            th, _ = golden_minimize(lambda a: _nu_at(f, grads, r, a)[1], theta[j] - step, theta[j] + step, 1e-10)
            x, val = _nu_at(f, grads, r, th)
            extra_pts.append(x)
            extra_f.append(f.eval(x))
            extra_nu.append(val)
        if extra_pts:
            pts = np.vstack([pts, np.array(extra_pts)])
            fv = np.concatenate([fv, np.array(extra_f)])
            nu = np.concatenate([nu, np.array(extra_nu)])
        return RabierField(r=float(r), f_values=fv, nu_values=nu, points=pts, resolution=resolution)

    rng = ensure_generator(stream, "rabier", int(round(r * 1024)))
    pts = uniform_sphere_sample(f.nvars, r, samples, rng).points
    grad_cols = np.column_stack([g.eval_many(pts) for g in grads])
    nu = np.linalg.norm(pts, axis=1) * np.linalg.norm(grad_cols, axis=1)
    fv = f.eval_many(pts)
    n_refine = max(8, samples // 1000)
    order = np.argsort(nu)[:n_refine]
    hessian = [[gi.partial(j) for j in range(f.nvars)] for gi in grads]
    extra_pts, extra_f, extra_nu = [], [], []
    for idx in order:
        x = _descend_on_sphere(f, grads, hessian, pts[idx].copy(), r)
        g = np.array([gi.eval(x) for gi in grads])
        extra_pts.append(x)
        extra_f.append(f.eval(x))
        extra_nu.append(float(np.linalg.norm(x)) * float(np.linalg.norm(g)))
    pts = np.vstack([pts, np.array(extra_pts)])
    fv = np.concatenate([fv, np.array(extra_f)])
    nu = np.concatenate([nu, np.array(extra_nu)])
    return RabierField(r=float(r), f_values=fv, nu_values=nu, points=pts, resolution=samples)


def _descend_on_sphere(f, grads, hessian, x: np.ndarray, r: float, steps: int = 120) -> np.ndarray:
    """Projected gradient descent for ||grad f||^2 constrained to the r-sphere."""

    def h(y):
        g = np.array([gi.eval(y) for gi in grads])
        return float(np.dot(g, g))

    value = h(x)
    eta = 1.0
    for _ in range(steps):
        g = np.array([gi.eval(x) for gi in grads])
        H = np.array([[hij.eval(x) for hij in row] for row in hessian])
        grad_h = 2.0 * H @ g
        xhat = x / np.linalg.norm(x)
        tang = grad_h - xhat * float(np.dot(xhat, grad_h))
        tn = float(np.linalg.norm(tang))
        if tn == 0.0:
            break
        improved = False
        for _ in range(30):
            trial = x - eta * tang
            trial *= r / np.linalg.norm(trial)
            tv = h(trial)
            if tv < value:
                x, value = trial, tv
                eta *= 1.5
                improved = True
                break
            eta *= 0.5
        if not improved:
            break
    return x


def detect_asymptotic_values(
    f: Polynomial,
    radii,
    bin_width: float = 0.02,
    slope_threshold: float = -0.5,
    abs_threshold: float = 0.1,
    resolution: int = 4096,
    samples: int = 20000,
    stream=None,
    fit_tail: int = 4,
) -> DetectionReport:
    """Sweep the Rabier quantity over growing spheres and cluster decaying bins.

    Per radius, the lower envelope of nu per f-value bin is formed; bins whose
    envelope decays (tail log-log slope below ``slope_threshold``) and ends
    below ``abs_threshold`` at the largest radius are clustered by adjacency
    into candidates.  An empty candidate list means no asymptotic critical
    value was detected in the scanned range; it is not a certificate.
    """
    radii = [float(r) for r in radii]
    if len(radii) < 4:
        raise ValueError("detection needs at least 4 radii")
    if any(b <= a for a, b in zip(radii, radii[1:])):
        raise ValueError("radii must be strictly increasing")
    if bin_width <= 0:
        raise ValueError("bin_width must be positive")

    fields = [rabier_scan(f, r, resolution=resolution, samples=samples, stream=stream) for r in radii]
    global_min = [float(np.min(fld.nu_values)) for fld in fields]
    global_slope = loglog_slope(radii, [max(v, _TINY) for v in global_min])

    w = bin_width
    # envelope[k][i] = (min nu, argmin sample index) for bin k at radius index i
    envelope: dict[int, dict[int, tuple[float, int]]] = {}
    for i, fld in enumerate(fields):
        ks = np.floor(fld.f_values / w).astype(np.int64)
        order = np.argsort(fld.nu_values)
        seen: set[int] = set()
        for idx in order:
            k = int(ks[idx])
            if k in seen:
                continue
            seen.add(k)
            envelope.setdefault(k, {})[i] = (float(fld.nu_values[idx]), int(idx))

    last = len(radii) - 1
    min_occupancy = min(4, len(radii))
    candidate_bins = []
    for k, per_radius in envelope.items():
        if last not in per_radius or len(per_radius) < min_occupancy:
            continue
        occupied = sorted(per_radius)
        tail = occupied[-min(fit_tail, len(occupied)) :]
        slope = loglog_slope([radii[i] for i in tail], [max(per_radius[i][0], _TINY) for i in tail])
        if slope < slope_threshold and per_radius[last][0] < abs_threshold:
            candidate_bins.append(k)

    candidates: list[AsymptoticCriticalValue] = []
    for cluster in _cluster_consecutive(sorted(candidate_bins)):
        members = set(cluster)
        per_radius: dict[int, tuple[float, int, int]] = {}
        for k in members:
            for i, (val, idx) in envelope[k].items():
                if i not in per_radius or val < per_radius[i][0]:
                    per_radius[i] = (val, idx, k)
        occupied = sorted(per_radius)
        tail = occupied[-min(fit_tail, len(occupied)) :]
        slope = loglog_slope([radii[i] for i in tail], [max(per_radius[i][0], _TINY) for i in tail])
        witnesses = []
        for i in occupied:
            val, idx, _ = per_radius[i]
            fld = fields[i]
            witnesses.append(Witness(r=radii[i], x=fld.points[idx].copy(), f_value=float(fld.f_values[idx]), nu=val))
        candidates.append(
            AsymptoticCriticalValue(
                value=w * (cluster[0] + cluster[-1] + 1) / 2.0,
                bin_width=w,
                decay_slope=slope,
                final_nu=per_radius[last][0],
                witnesses=witnesses,
            )
        )

    rows = [
        (radii[i], w * (k + 0.5), per_radius[i][0])
        for k, per_radius in sorted(envelope.items())
        for i in sorted(per_radius)
    ]
    return DetectionReport(
        candidates=candidates,
        radii=radii,
        bin_width=w,
        slope_threshold=slope_threshold,
        abs_threshold=abs_threshold,
        global_min_nu=global_min,
        global_slope=global_slope,
        envelope_rows=rows,
    )


def _cluster_consecutive(ks: list[int]) -> list[list[int]]:
    clusters = []
    for k in ks:
        if clusters and k == clusters[-1][-1] + 1:
            clusters[-1].append(k)
        else:
            clusters.append([k])
    return clusters


def fiber_rabier_min(
    f: Polynomial,
    t: float,
    r: float,
    points: FiberPointSet | None = None,
    resolution: int = 4096,
) -> float:
    """Minimum of nu over the fiber-sphere intersection; +inf when empty."""
    if points is None:
        if f.nvars != 2:
            raise ValueError("supply a precomputed point set for nvars != 2")
        points = circle_fiber_points(f, t, r, resolution=resolution)
    if len(points.points) == 0:
        return math.inf
    return float(min(p.rabier for p in points.points))


def sigma1(
    f: Polynomial,
    t: float,
    search_box: float = 10.0,
    grid: int = 41,
    tol: float = 1e-8,
) -> float:
    """1 + the largest norm of a critical point on the fiber {f = t}; 1 if none.

    Critical points are found by dense grid seeding plus Newton on grad f = 0
    inside [-search_box, search_box]^2.  Critical points outside the box are
    not seen here; their Rabier decay shows up in the sphere sweeps instead.
    """
    if f.nvars != 2:
        raise ValueError("sigma1 is implemented for 2-variable polynomials")
    grads = f.gradient()
    hessian = [[gi.partial(j) for j in range(2)] for gi in grads]
    found: list[np.ndarray] = []
    axis = np.linspace(-search_box, search_box, grid)
    for sx in axis:
        for sy in axis:
            x = np.array([sx, sy])
            for _ in range(30):
                g = np.array([gi.eval(x) for gi in grads])
                if np.linalg.norm(g) < 1e-12 * (1.0 + np.linalg.norm(x)):
                    break
                H = np.array([[hij.eval(x) for hij in row] for row in hessian])
                det = H[0, 0] * H[1, 1] - H[0, 1] * H[1, 0]
                if abs(det) < 1e-300:
                    x = None
                    break
                x = x - np.linalg.solve(H, g)
                if np.linalg.norm(x) > 10.0 * search_box:
                    x = None
                    break
            else:
                x = None
            if x is None or np.max(np.abs(x)) > 1.5 * search_box:
                continue
            g = np.array([gi.eval(x) for gi in grads])
            if np.linalg.norm(g) >= 1e-10 * (1.0 + np.linalg.norm(x)):
                continue
            if not any(np.linalg.norm(x - c) < 1e-6 for c in found):
                found.append(x)
    on_fiber = [c for c in found if abs(f.eval(c) - t) <= tol]
    if not on_fiber:
        return 1.0
    return 1.0 + float(max(np.linalg.norm(c) for c in on_fiber))


def sigma2(
    f: Polynomial,
    t: float,
    eps1_value: float,
    radii,
    resolution: int = 4096,
) -> float:
    """Smallest sampled fiber Rabier minimum over radii >= eps1_value.

    +inf when the fiber misses every sampled sphere beyond eps1_value.
    """
    if eps1_value < 1.0:
        raise ValueError("eps1_value must be >= 1")
    best = math.inf
    for r in radii:
        if r < eps1_value:
            continue
        best = min(best, fiber_rabier_min(f, t, float(r), resolution=resolution))
    return best


@dataclass
class SigmaEnvelope:
    """Piecewise-linear envelopes strictly bracketing sigma1 and sigma2.

    eps1 > sigma1 and eps2 < sigma2 hold at every kept grid point; grid
    points where sigma2 was not finite-positive are dropped and recorded.
    """

    t_grid: np.ndarray
    sigma1: np.ndarray
    sigma2: np.ndarray
    eps1: np.ndarray
    eps2: np.ndarray
    dropped: list[tuple[float, str]]

    def eps1_at(self, t: float) -> float:
        return float(np.interp(t, self.t_grid, self.eps1))

    def eps2_at(self, t: float) -> float:
        return float(np.interp(t, self.t_grid, self.eps2))


def build_envelopes(sigma_samples) -> SigmaEnvelope:
    """Envelopes from (t, sigma1, sigma2) triples: eps1 = 1.1 s1, eps2 = 0.9 s2."""
    kept, dropped = [], []
    for t, s1, s2 in sigma_samples:
        if not math.isfinite(s2):
            dropped.append((float(t), "sigma2 not finite (level too close to a candidate)"))
        elif s2 <= 0:
            dropped.append((float(t), "sigma2 not positive"))
        else:
            kept.append((float(t), float(s1), float(s2)))
    if len(kept) < 2:
        raise ValueError(f"need at least 2 grid points with finite sigma values, have {len(kept)}")
    kept.sort()
    ts = np.array([k[0] for k in kept])
    s1 = np.array([k[1] for k in kept])
    s2 = np.array([k[2] for k in kept])
    return SigmaEnvelope(t_grid=ts, sigma1=s1, sigma2=s2, eps1=1.1 * s1, eps2=0.9 * s2, dropped=dropped)
