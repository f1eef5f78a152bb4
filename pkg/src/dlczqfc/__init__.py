"""Detection statistics of a cold-atom quantum memory with telecom frequency conversion.

Analytic detection-probability model, converter efficiency and noise model,
a trial-level Monte Carlo simulator, correlation estimators with counting
errors, and least-squares fits for storage-time and saturation curves.
"""
__version__ = "0.1.0"

from .dlcz import (
    DephasingModel,
    dephasing_overlap_mc,
    detection_probabilities,
    g2_cross_closed,
    intrinsic_retrieval,
    retrieval_efficiency_closed,
    storage_calibrated_params,
)
from .errors import (
    ClampWarning,
    ConfigError,
    DlczQfcError,
    DomainError,
    FitError,
    NoCrossoverError,
    SingularFitError,
    ValidationError,
)
from .fitting import FitResult, fit_gaussian_decay, fit_linear_origin, fit_saturation
from .params import ExperimentParams, PhysicalConstants, default_paper_params, validate
from .qfc import (
    ConversionDevice,
    chain_extinction,
    compose_g2_with_noise,
    crossover_distance,
    equivalent_fiber_length,
    eta_device,
    eta_internal,
    noise_probability,
    snr,
    storage_to_fiber_length,
)
from .sim import SimulationConfig, TrialCounts, simulate
from .stats import (
    CorrelationEstimate,
    cauchy_schwarz_R,
    g2_auto,
    g2_cross,
    max_heralding_efficiency,
    max_visibility,
    snr_from_counts,
    violation_significance,
)

__all__ = [
    "__version__",
    "DephasingModel",
    "dephasing_overlap_mc",
    "detection_probabilities",
    "g2_cross_closed",
    "intrinsic_retrieval",
    "retrieval_efficiency_closed",
    "storage_calibrated_params",
    "ClampWarning",
    "ConfigError",
    "DlczQfcError",
    "DomainError",
    "FitError",
    "NoCrossoverError",
    "SingularFitError",
    "ValidationError",
    "FitResult",
    "fit_gaussian_decay",
    "fit_linear_origin",
    "fit_saturation",
    "ExperimentParams",
    "PhysicalConstants",
    "default_paper_params",
    "validate",
    "ConversionDevice",
    "chain_extinction",
    "compose_g2_with_noise",
    "crossover_distance",
    "equivalent_fiber_length",
    "eta_device",
    "eta_internal",
    "noise_probability",
    "snr",
    "storage_to_fiber_length",
    "SimulationConfig",
    "TrialCounts",
    "simulate",
    "CorrelationEstimate",
    "cauchy_schwarz_R",
    "g2_auto",
    "g2_cross",
    "max_heralding_efficiency",
    "max_visibility",
    "snr_from_counts",
    "violation_significance",
]
