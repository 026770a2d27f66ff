"""Training dynamics of over-parameterized periodic-ansatz quantum neural networks.

Finite-p gradient descent, tangent kernels and their asymptotic split, the
infinite-parameter measurement flow, and global-minimum statistics.
"""

from .asymdyn import (
    AsymState,
    GlobalMinimumSample,
    asym_rhs,
    hadamard_opnorm_bound_check,
    init_asym_measurement,
    integrate_asym,
    lambda_g_statistics,
    sample_global_minimum,
    track_lambda_min,
)
from .kernels import KernelSnapshot, delta_matrix, k_asym, k_pert, kernel_snapshot, tangent_kernel, y_matrix, y_star
from .linalg import ContractError, DimensionError, RngStream, haar_unitary, op_norm
from .model import (
    Measurement,
    PeriodicAnsatz,
    TrainingSet,
    build_generating_hamiltonian,
    build_periodic_ansatz,
    build_pauli_like_measurement,
    conjugated_generators,
    parameterized_measurement,
    predict,
    sample_orthogonal_dataset,
)
from .train import NumericalAbort, TrainConfig, Trajectory, grad, loss, residuals, train_gd

__version__ = "0.1.0"

__all__ = [
    "AsymState",
    "ContractError",
    "DimensionError",
    "GlobalMinimumSample",
    "KernelSnapshot",
    "Measurement",
    "NumericalAbort",
    "PeriodicAnsatz",
    "RngStream",
    "TrainConfig",
    "TrainingSet",
    "Trajectory",
    "asym_rhs",
    "build_generating_hamiltonian",
    "build_pauli_like_measurement",
    "build_periodic_ansatz",
    "conjugated_generators",
    "delta_matrix",
    "grad",
    "haar_unitary",
    "hadamard_opnorm_bound_check",
    "init_asym_measurement",
    "integrate_asym",
    "k_asym",
    "k_pert",
    "kernel_snapshot",
    "lambda_g_statistics",
    "loss",
    "op_norm",
    "parameterized_measurement",
    "predict",
    "residuals",
    "sample_global_minimum",
    "sample_orthogonal_dataset",
    "tangent_kernel",
    "track_lambda_min",
    "train_gd",
    "y_matrix",
    "y_star",
]
