"""Fast built-in property checks, independent of the test suite."""

from __future__ import annotations

from typing import Callable

import numpy as np

from ..asymdyn import (
    asym_rhs,
    hadamard_opnorm_bound_check,
    init_asym_measurement,
    integrate_asym,
    sample_global_minimum,
)
from ..kernels import k_asym_projection, k_asym_trace, k_pert, tangent_kernel
from ..linalg import RngStream
from ..model import Measurement, TrainingSet, build_periodic_ansatz, parameterized_measurement, predictions, sample_orthogonal_dataset
from ..train import grad, loss


def _gradient_fd() -> float:
    worst = 0.0
    for k, (d, p, m) in enumerate([(2, 1, 1), (4, 3, 2), (8, 8, 4)]):
        rs = RngStream(k, 50)
        ans = build_periodic_ansatz(d, p, rs.child(51))
        ds = sample_orthogonal_dataset(d, m, rs.child(52))
        meas = Measurement.pauli_like(d, 1.5)
        theta = rs.child(53).generator().uniform(-np.pi, np.pi, p)
        g = grad(ans, theta, ds, meas)
        fd = np.array(
            [(loss(ans, theta + 1e-5 * e, ds, meas) - loss(ans, theta - 1e-5 * e, ds, meas)) / 2e-5 for e in np.eye(p)]
        )
        worst = max(worst, np.linalg.norm(g - fd) / max(np.linalg.norm(fd), 1e-12))
    return worst


def _kernel_split() -> float:
    rs = RngStream(3, 60)
    ans = build_periodic_ansatz(4, 10, rs.child(61))
    ds = sample_orthogonal_dataset(4, 2, rs.child(62))
    meas = Measurement.pauli_like(4, 1.0)
    theta = rs.child(63).generator().uniform(-np.pi, np.pi, 10)
    k = tangent_kernel(ans, theta, ds, meas) / 10
    m_theta = parameterized_measurement(ans, theta, meas)
    return float(np.max(np.abs(k - k_asym_trace(m_theta, ds) - k_pert(ans, theta, ds))))


def _kasym_routes() -> float:
    rs = RngStream(4, 70)
    ds = sample_orthogonal_dataset(8, 3, rs.child(71))
    m = init_asym_measurement(8, 1.0, rs.child(72))
    return float(np.max(np.abs(k_asym_trace(m, ds, 2.0) - k_asym_projection(m, ds, 2.0))))


def _spectrum_drift() -> float:
    rs = RngStream(5, 80)
    ds = sample_orthogonal_dataset(8, 2, rs.child(81))
    m0 = init_asym_measurement(8, 2.0, rs.child(82))
    return integrate_asym(m0, ds, 0.5, log_every=100).max_spectrum_drift


def _one_sample_rate() -> float:
    g = 2.0
    ds = TrainingSet(np.array([[1.0, 1.0]]) / np.sqrt(2), [1.0])
    m = g * np.diag([1.0, -1.0]).astype(complex)
    rate = predictions(asym_rhs(m, ds), ds.states)[0]
    return abs(rate - 2 * g * g)


def _minimum_embedding() -> float:
    smp = sample_global_minimum(32, 4, 2.0, RngStream(6, 90))
    base, ds = smp.embed()
    pred = abs(predictions(2.0 * base, ds.states) - ds.labels).max()
    kdev = np.max(np.abs(k_asym_projection(base, ds, 2.0) - smp.k_asym_at_min))
    return float(max(pred, kdev))


def _hadamard() -> float:
    gen = np.random.default_rng(7)
    bad = 0
    for _ in range(50):
        a = gen.standard_normal((4, 4)) + 1j * gen.standard_normal((4, 4))
        b = gen.standard_normal((4, 4)) + 1j * gen.standard_normal((4, 4))
        bad += not hadamard_opnorm_bound_check(a + a.conj().T, b + b.conj().T)
    return float(bad)


CHECKS: list[tuple[str, Callable[[], float], float]] = [
    ("gradient vs central differences (rel)", _gradient_fd, 1e-6),
    ("K/(pZ) = K_asym + K_pert", _kernel_split, 1e-9),
    ("K_asym trace vs projection", _kasym_routes, 1e-10),
    ("asymptotic spectrum drift", _spectrum_drift, 1e-6),
    ("one-sample rate 2(g^2 - yhat^2) r", _one_sample_rate, 1e-10),
    ("global-minimum embedding", _minimum_embedding, 1e-10),
    ("Hadamard operator-norm bound violations", _hadamard, 0.5),
]


def run_selftest(echo: Callable[[str], None] = print) -> bool:
    ok = True
    for name, fn, tol in CHECKS:
        val = fn()
        passed = bool(val <= tol)
        ok &= passed
        echo(f"{'PASS' if passed else 'FAIL'}  {name}: {val:.3e} (tol {tol:.0e})")
    return ok
