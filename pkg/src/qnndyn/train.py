"""Square-loss ERM, analytic gradients and gradient-descent training."""

from __future__ import annotations

import logging
import time as _time
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

from .linalg import ContractError, op_norm
from .model import (
    Measurement,
    PeriodicAnsatz,
    TrainingSet,
    commutator_coefficients,
    measurement_from_prefixes,
    normalization_z,
    predictions,
)

log = logging.getLogger(__name__)

MONOTONE_TOL = 1e-12
DIVERGENCE_FACTOR = 10.0


class NumericalAbort(RuntimeError):
    """Training or integration produced non-finite or runaway values."""


@dataclass
class ForwardPass:
    prefixes: np.ndarray
    m_theta: np.ndarray
    predictions: np.ndarray
    residuals: np.ndarray

    @property
    def loss(self) -> float:
        r = self.residuals
        return float(r @ r) / (2 * r.size)


def forward(ansatz: PeriodicAnsatz, theta, dataset: TrainingSet, meas: Measurement) -> ForwardPass:
    prefixes = ansatz.prefixes(theta)
    m_theta = measurement_from_prefixes(prefixes, meas.base)
    yhat = predictions(m_theta, dataset.states, meas.gamma)
    return ForwardPass(prefixes, m_theta, yhat, dataset.labels - yhat)


def residuals(ansatz, theta, dataset: TrainingSet, meas: Measurement) -> np.ndarray:
    """``r_j = y_j - yhat_j``."""
    return forward(ansatz, theta, dataset, meas).residuals


def loss(ansatz, theta, dataset: TrainingSet, meas: Measurement) -> float:
    """``L = (1/2m) sum_j (yhat_j - y_j)^2``."""
    return forward(ansatz, theta, dataset, meas).loss


def _grad_from_forward(ansatz, fp: ForwardPass, dataset: TrainingSet, meas: Measurement) -> np.ndarray:
    a = commutator_coefficients(ansatz, fp.prefixes, fp.m_theta, dataset.states)
    return -(meas.gamma / dataset.size) * (a @ fp.residuals)


def grad(ansatz, theta, dataset: TrainingSet, meas: Measurement) -> np.ndarray:
    """Analytic gradient of the loss.

    Component ``l`` is ``-(gamma/m) sum_j r_j tr(rho_j i[H~_l, M(theta)])``.
    """
    fp = forward(ansatz, theta, dataset, meas)
    return _grad_from_forward(ansatz, fp, dataset, meas)


def sublinear_bound_constants(ansatz: PeriodicAnsatz, eta: float, loss0: float) -> tuple[float, float]:
    """Constants of the lower bound ``L(t) >= 1 / (c0 + c1 t)^2``.

    ``c0 = L(0)^(-1/2)`` and ``c1 = 12 eta sum_l ||H~_l||^2 = 12 eta p ||H||^2``.
    Here ``t`` counts gradient-descent iterations (flow ``dtheta/dt = -eta grad L``).
    """
    if loss0 <= 0:
        raise ContractError("sublinear bound undefined for zero initial loss")
    c0 = loss0 ** -0.5
    c1 = 12.0 * eta * ansatz.num_params * op_norm(ansatz.generator) ** 2
    return c0, c1


def sublinear_bound(c0: float, c1: float, iterations) -> np.ndarray:
    t = np.asarray(iterations, dtype=float)
    return 1.0 / (c0 + c1 * t) ** 2


def kernel_time(iterations, eta: float, p: int, z: float, m: int) -> np.ndarray:
    """Map iteration counts to the time axis where ``eta = m / (p Z)`` per unit time."""
    return np.asarray(iterations, dtype=float) * eta * p * z / m


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float
    max_iters: int = 10000
    early_stop_loss: float = 0.0
    log_every: int = 1

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ContractError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.max_iters < 1:
            raise ContractError(f"max_iters must be >= 1, got {self.max_iters}")
        if self.early_stop_loss < 0:
            raise ContractError(f"early_stop_loss must be >= 0, got {self.early_stop_loss}")
        if self.log_every < 1:
            raise ContractError(f"log_every must be >= 1, got {self.log_every}")

    @classmethod
    def reference_default(cls, p: int, **kw) -> "TrainConfig":
        """Learning rate ``1e-3 / p``, 10000 iterations."""
        return cls(learning_rate=1e-3 / p, **kw)


@dataclass
class Trajectory:
    """Logged training history. ``time`` is ``iteration * learning_rate``."""

    learning_rate: float
    theta0: np.ndarray
    iterations: list[int] = field(default_factory=list)
    wall_time: list[float] = field(default_factory=list)
    losses: list[float] = field(default_factory=list)
    residuals: list[np.ndarray] = field(default_factory=list)
    predictions: list[np.ndarray] = field(default_factory=list)
    theta_disp_2: list[float] = field(default_factory=list)
    theta_disp_inf: list[float] = field(default_factory=list)
    snapshots: list[Any] = field(default_factory=list)
    monotone_violations: list[int] = field(default_factory=list)
    theta_final: np.ndarray | None = None
    stop_reason: str = ""

    @property
    def time(self) -> np.ndarray:
        return np.asarray(self.iterations, dtype=float) * self.learning_rate

    @property
    def loss_array(self) -> np.ndarray:
        return np.asarray(self.losses)

    def __len__(self) -> int:
        return len(self.iterations)


SnapshotFn = Callable[[np.ndarray, int], Any]


class GradientDescent:
    """Stateful plain gradient descent from ``theta(0) = 0``.

    :func:`train_gd` drives a single instance; experiments step several in
    lockstep to stop on the seed-averaged loss.
    """

    def __init__(
        self,
        ansatz: PeriodicAnsatz,
        dataset: TrainingSet,
        meas: Measurement,
        config: TrainConfig,
        snapshot: SnapshotFn | None = None,
        theta0=None,
    ):
        if dataset.dim != ansatz.dim or meas.dim != ansatz.dim:
            raise ContractError("dataset, measurement and ansatz dimensions differ")
        self.ansatz = ansatz
        self.dataset = dataset
        self.meas = meas
        self.config = config
        self.snapshot = snapshot
        theta0 = np.zeros(ansatz.num_params) if theta0 is None else np.asarray(theta0, dtype=float)
        self.theta = theta0.copy()
        self.iteration = 0
        self.traj = Trajectory(config.learning_rate, theta0.copy())
        self._t_start = _time.perf_counter()
        self._fp = forward(ansatz, self.theta, dataset, meas)
        self.loss0 = self._fp.loss
        self._last_logged = None
        self.done = False
        self._record(force=True)

    @property
    def loss(self) -> float:
        return self._fp.loss

    def _record(self, force: bool = False) -> None:
        if not force and self.iteration % self.config.log_every:
            return
        tr = self.traj
        cur = self._fp.loss
        if self._last_logged is not None and cur > self._last_logged + MONOTONE_TOL:
            tr.monotone_violations.append(self.iteration)
            log.warning("loss increased at iteration %d: %.3e -> %.3e", self.iteration, self._last_logged, cur)
        self._last_logged = cur
        disp = self.theta - tr.theta0
        tr.iterations.append(self.iteration)
        tr.wall_time.append(_time.perf_counter() - self._t_start)
        tr.losses.append(cur)
        tr.residuals.append(self._fp.residuals.copy())
        tr.predictions.append(self._fp.predictions.copy())
        tr.theta_disp_2.append(float(np.linalg.norm(disp)))
        tr.theta_disp_inf.append(float(np.max(np.abs(disp))) if disp.size else 0.0)
        if self.snapshot is not None:
            tr.snapshots.append(self.snapshot(self.theta.copy(), self.iteration))

    def _check(self) -> None:
        cur = self._fp.loss
        if not np.isfinite(cur):
            raise NumericalAbort(f"non-finite loss at iteration {self.iteration}")
        if cur > DIVERGENCE_FACTOR * max(self.loss0, 1e-300):
            raise NumericalAbort(
                f"loss {cur:.3e} exceeds {DIVERGENCE_FACTOR}x its initial value at iteration {self.iteration}"
            )

    def step(self) -> None:
        g = _grad_from_forward(self.ansatz, self._fp, self.dataset, self.meas)
        self.theta = self.theta - self.config.learning_rate * g
        self.iteration += 1
        self._fp = forward(self.ansatz, self.theta, self.dataset, self.meas)
        self._check()
        self._record()

    def finish(self, reason: str) -> Trajectory:
        if self.traj.iterations[-1] != self.iteration:
            self._record(force=True)
        self.traj.theta_final = self.theta.copy()
        self.traj.stop_reason = reason
        self.done = True
        return self.traj

    def run(self) -> Trajectory:
        cfg = self.config
        while self.iteration < cfg.max_iters:
            if self.loss < cfg.early_stop_loss:
                return self.finish("early_stop")
            self.step()
        if self.loss < cfg.early_stop_loss:
            return self.finish("early_stop")
        return self.finish("max_iters")


def train_gd(
    ansatz: PeriodicAnsatz,
    dataset: TrainingSet,
    meas: Measurement,
    config: TrainConfig,
    snapshot: SnapshotFn | None = None,
) -> Trajectory:
    """Gradient descent ``theta <- theta - eta grad L`` from ``theta = 0``.

    Stops at ``max_iters`` or once the loss drops below ``early_stop_loss``.
    Raises :class:`NumericalAbort` on non-finite loss or divergence.
    """
    return GradientDescent(ansatz, dataset, meas, config, snapshot).run()


def train_lockstep(
    runs: Sequence[GradientDescent], mean_stop_loss: float = 0.0, max_iters: int | None = None
) -> list[Trajectory]:
    """Advance several runs together, stopping all once their mean loss drops below a threshold."""
    if not runs:
        return []
    max_iters = max_iters if max_iters is not None else max(r.config.max_iters for r in runs)
    it = 0
    while it < max_iters:
        if np.mean([r.loss for r in runs]) < mean_stop_loss:
            return [r.finish("mean_early_stop") for r in runs]
        for r in runs:
            r.step()
        it += 1
    reason = "mean_early_stop" if np.mean([r.loss for r in runs]) < mean_stop_loss else "max_iters"
    return [r.finish(reason) for r in runs]


def generator_norm_sum(ansatz: PeriodicAnsatz) -> float:
    """``sum_l ||H~_l||^2``, equal to ``p ||H||^2`` for the periodic ansatz."""
    return ansatz.num_params * op_norm(ansatz.generator) ** 2


__all__ = [
    "ForwardPass",
    "GradientDescent",
    "NumericalAbort",
    "TrainConfig",
    "Trajectory",
    "forward",
    "generator_norm_sum",
    "grad",
    "kernel_time",
    "loss",
    "normalization_z",
    "residuals",
    "sublinear_bound",
    "sublinear_bound_constants",
    "train_gd",
    "train_lockstep",
]
