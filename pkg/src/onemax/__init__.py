"""Smooth, Pareto-optimal threshold algorithms for one-max-search with predictions."""

from onemax.core import (
    Instance,
    Outcome,
    ProblemParams,
    additive_error,
    max_price,
    multiplicative_error,
    run_threshold,
    worst_case_instance,
)
from onemax.errors import DomainError, UnsupportedExponentError
from onemax.thresholds import (
    ThresholdSpec,
    is_pareto_optimal_threshold,
    lambda_to_r,
    phi_rho,
    varphi,
)

__all__ = [
    "DomainError",
    "Instance",
    "Outcome",
    "ProblemParams",
    "ThresholdSpec",
    "UnsupportedExponentError",
    "additive_error",
    "is_pareto_optimal_threshold",
    "lambda_to_r",
    "max_price",
    "multiplicative_error",
    "phi_rho",
    "run_threshold",
    "varphi",
    "worst_case_instance",
]

__version__ = "0.1.0"
