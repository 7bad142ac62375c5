"""Discrete self-expanding multiphase surface networks.

Minimises the weighted area ``int exp(|x|^2 / 4) dA`` over phase-labelled,
non-manifold triangle complexes spanning a prescribed cone, and verifies the
junction, balancing and asymptotic conditions of the result.
"""

__version__ = "0.1.0"

from .complex import (SurfaceComplex, connected_components, extract_junctions, read_mesh,
                      refine, validate, write_mesh)
from .cone import (ConeSpec, cross_cone, plane_cone, read_cone, tetra_cone, validate_cone,
                   write_cone, y_cone)
from .conformal import (angle_of_parallelism, convert, hyperbolic_distance, pullback_check,
                        to_ball, to_hyperboloid)
from .estimator import ExpanderNetwork
from .geometry import (expander_residual, jacobi_apply, mean_curvature, weighted_area,
                       weighted_area_gradient)
from .solver import OptimizerState, SolveConfig, continue_in_radius, minimize, quality_pass
from .templates import TEMPLATES, get_template, instantiate
from .verify import ToleranceProfile, VerificationReport, full_report

__all__ = [
    "ConeSpec", "ExpanderNetwork", "OptimizerState", "SolveConfig", "SurfaceComplex",
    "TEMPLATES", "ToleranceProfile", "VerificationReport", "angle_of_parallelism",
    "connected_components", "continue_in_radius", "convert", "cross_cone", "expander_residual",
    "extract_junctions", "full_report", "get_template", "hyperbolic_distance", "instantiate",
    "jacobi_apply", "mean_curvature", "minimize", "plane_cone", "pullback_check", "quality_pass",
    "read_cone", "read_mesh", "refine", "tetra_cone", "to_ball", "to_hyperboloid", "validate",
    "validate_cone", "weighted_area", "weighted_area_gradient", "write_cone", "write_mesh",
    "y_cone",
]
