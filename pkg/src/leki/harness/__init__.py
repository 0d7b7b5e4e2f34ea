"""Batch experiments: configuration, seeding, trial loops and result files."""
from .config import ExperimentConfig, LocalizationSpec, load_config, load_preset, parse_config
from .data import read_sounding_csv, write_sounding_csv
from .experiments import (
    AggregateReport,
    ExperimentResult,
    TrialResult,
    aggregate,
    build_scheme,
    lorenz96_truths,
    run_dc,
    run_experiment,
    run_linear,
    run_lorenz96,
    run_nonlinear,
)
from .io import aggregate_files, read_trials_csv, resolve_output_dir, write_result
from .rng import stream

__all__ = [
    "ExperimentConfig",
    "LocalizationSpec",
    "load_config",
    "load_preset",
    "parse_config",
    "read_sounding_csv",
    "write_sounding_csv",
    "AggregateReport",
    "ExperimentResult",
    "TrialResult",
    "aggregate",
    "aggregate_files",
    "build_scheme",
    "lorenz96_truths",
    "run_dc",
    "run_experiment",
    "run_linear",
    "run_lorenz96",
    "run_nonlinear",
    "read_trials_csv",
    "resolve_output_dir",
    "write_result",
    "stream",
]
