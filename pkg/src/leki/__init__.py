"""Ensemble Kalman inversion with covariance localization.

Derivative-free solver for ``y = G(u) + noise`` that evolves an ensemble of
candidate parameters along the (localized) EKI flow, with Tikhonov
regularization by problem extension, built-in forward models, diagnostics and
a batch harness.
"""
from .diagnostics import MetricsRecorder, MetricsRow, RiccatiParams
from .dynamics import (
    InflationConfig,
    IterationState,
    RunRecord,
    StepPolicy,
    StoppingRule,
    discrete_update,
    euler_step,
    inflation_vectors,
    lambda_at,
    run,
)
from .ensemble import Ensemble, EnsembleStats, compute_stats, norms, subspace_residual
from .errors import ConfigurationError, DomainError, LekiError, NumericFailure, UsageError
from .localization import (
    DistanceMetric,
    LocalizationKernel,
    LocalizationScheme,
    build_psi,
    gaspari_cohn,
    localize_cup,
    localize_cuu,
    psi_min_eig,
)
from .teki import TikhonovExtension, extend, tikhonov_loss

__version__ = "0.1.0"

__all__ = [
    "Ensemble",
    "EnsembleStats",
    "compute_stats",
    "norms",
    "subspace_residual",
    "DistanceMetric",
    "LocalizationKernel",
    "LocalizationScheme",
    "build_psi",
    "gaspari_cohn",
    "localize_cuu",
    "localize_cup",
    "psi_min_eig",
    "InflationConfig",
    "StepPolicy",
    "StoppingRule",
    "IterationState",
    "RunRecord",
    "lambda_at",
    "inflation_vectors",
    "discrete_update",
    "euler_step",
    "run",
    "TikhonovExtension",
    "extend",
    "tikhonov_loss",
    "MetricsRow",
    "MetricsRecorder",
    "RiccatiParams",
    "LekiError",
    "ConfigurationError",
    "UsageError",
    "DomainError",
    "NumericFailure",
]
