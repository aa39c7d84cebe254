"""Density at infinity of polynomial fibers.

Estimates theta(fiber, infinity) by sphere counts, co-area Monte Carlo and
the inversion transform, detects asymptotic critical values from the decay
of the Rabier quantity, and checks Lipschitz/rugosity regularity of the
density profile empirically.
"""

from .critical import (
    AsymptoticCriticalValue,
    DetectionReport,
    RabierField,
    SigmaEnvelope,
    build_envelopes,
    detect_asymptotic_values,
    fiber_rabier_min,
    rabier_scan,
    sigma1,
    sigma2,
)
from .density import (
    DensityCurve,
    DensityEstimate,
    DensitySample,
    EstimationError,
    ball_coarea_density,
    ball_volume,
    coarea_density_curve,
    default_radii,
    density_at_origin,
    extrapolate_limit,
    inversion_density,
    sphere_area,
    sphere_coarea_density,
    sphere_count_density,
)
from .fibers import (
    FiberPoint,
    FiberPointSet,
    ProjectionError,
    SlabSample,
    circle_fiber_points,
    newton_project,
    slab_sample,
)
from .geometry import (
    SphereSample,
    apply_inversion_jacobian,
    circle_grid,
    invert,
    inversion_jacobian,
    invert_fiber_polynomial,
    tangent_projection_norm,
    uniform_ball_sample,
    uniform_sphere_sample,
)
from .polynomials import ParseError, Polynomial, parse_polynomial
from .regularity import (
    Discontinuity,
    LipschitzReport,
    MarginError,
    ProfilePoint,
    RugosityPair,
    RugosityReport,
    density_profile,
    lipschitz_report,
    profile_estimator,
    rugosity_check,
    rugosity_field,
)
from .streams import ensure_generator, stream

__version__ = "0.1.0"
