"""Configuration-driven experiment harness (CSV, SVG and JSON outputs)."""

from .config import KINDS, ConfigError, ExperimentConfig, load_acceptance, load_default
from .records import RunRecord, rate_estimate
from .runners import (
    run_asym_lambda_sweep,
    run_experiment,
    run_kernel_drift,
    run_minima_sampling,
    run_one_sample,
    run_pauli_sublinear,
    run_scaled_fast,
    run_y_concentration,
    verify_run,
)

__all__ = [
    "KINDS",
    "ConfigError",
    "ExperimentConfig",
    "RunRecord",
    "load_acceptance",
    "load_default",
    "rate_estimate",
    "run_asym_lambda_sweep",
    "run_experiment",
    "run_kernel_drift",
    "run_minima_sampling",
    "run_one_sample",
    "run_pauli_sublinear",
    "run_scaled_fast",
    "run_y_concentration",
    "verify_run",
]
