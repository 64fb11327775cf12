"""Spectral asymptotics for string problems with self-similar weights of zero spectral order."""
from .asymptotics import IndexCurve, ProfileEstimate, exponent_fit, lambda_profile, s_bounds, s_estimate
from .pencil import assemble, build_grid, dense_oracle, eigenvalues, inertia_index
from .renewal import HypothesisError, RenewalSystem, solve_continuous, solve_coupled, solve_scalar
from .selfsim import (
    ParameterError,
    SimilarityParams,
    arithmetic_structure,
    builtin,
    spectral_order,
    validate_params,
)

__version__ = "0.1.0"
