"""Conformal length distances on planar rectangles, grid geodesics and Gamma-convergence checks."""

from .counterexample import (phi_profile, psi, refraction_oracle, run_counterexample, staircase_curve,
                             verify_not_length)
from .fields import GridField, ScalarField, distance_to
from .functionals import (DiscreteMeasure, eval_F, eval_J, inf_convolution, lipschitz_constant,
                          mcshane_gap)
from .gamma import (CompactExhaustion, MetricSequence, gamma_F_check, gamma_J_check, gamma_L_check,
                    localized_measure, recovery_curve, sup_gap_on_compact)
from .geometry import Domain, DomainError, Point
from .metric import (Curve, EuclideanOracle, RefinementPolicy, constant_speed_reparam, curve_length,
                     geodesic_defect)
from .solver import (ConformalMetric, ConstructionError, DistanceSolver, UnreachableError, build_solver,
                     extend_closure, validate_membership)

__version__ = "0.1.0"

__all__ = [
    "CompactExhaustion", "ConformalMetric", "ConstructionError", "Curve", "DiscreteMeasure",
    "DistanceSolver", "Domain", "DomainError", "EuclideanOracle", "GridField", "MetricSequence",
    "Point", "RefinementPolicy", "ScalarField", "UnreachableError", "build_solver",
    "constant_speed_reparam", "curve_length", "distance_to", "eval_F", "eval_J", "extend_closure",
    "gamma_F_check", "gamma_J_check", "gamma_L_check", "geodesic_defect", "inf_convolution",
    "lipschitz_constant", "localized_measure", "mcshane_gap", "phi_profile", "psi",
    "recovery_curve", "refraction_oracle", "run_counterexample", "staircase_curve",
    "sup_gap_on_compact", "validate_membership", "verify_not_length",
]
