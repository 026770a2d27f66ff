"""Tangent kernel ``K(theta)`` and its asymptotic/perturbative split.

With learning rate ``eta = m / (p Z)`` the residuals obey
``dr/dt = -(K_asym + K_pert) r`` where ``(1/(p Z)) K = K_asym + K_pert``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import ContractError, check_hermitian, herm_eig, op_norm, swap_matrix
from .model import (
    Measurement,
    PeriodicAnsatz,
    TrainingSet,
    build_pauli_like_measurement,
    commutator_coefficients,
    generators_from_prefixes,
    measurement_from_prefixes,
    normalization_z,
)

IMAG_TOL = 1e-9
SYM_TOL = 1e-10
DEFAULT_D2_CAP = 4096


class ResourceCapError(MemoryError):
    """A ``d^2 x d^2`` object would exceed the configured size cap."""


def _real_part(k: np.ndarray, what: str) -> np.ndarray:
    scale = max(1.0, float(np.max(np.abs(k))) if k.size else 1.0)
    resid = float(np.max(np.abs(k.imag))) if k.size else 0.0
    if resid > IMAG_TOL * scale:
        raise ContractError(f"{what}: discarded imaginary part {resid:.3e} is not negligible")
    return np.ascontiguousarray(k.real)


def tangent_kernel(ansatz: PeriodicAnsatz, theta, dataset: TrainingSet, meas: Measurement) -> np.ndarray:
    """``K_ij = gamma^2 sum_l a_il a_jl`` with ``a_jl = tr(i[M(theta), rho_j] H~_l)``."""
    a = coefficient_matrix(ansatz, theta, dataset, meas)
    return meas.gamma**2 * (a.T @ a)


def coefficient_matrix(ansatz: PeriodicAnsatz, theta, dataset: TrainingSet, meas: Measurement) -> np.ndarray:
    """The ``(p, m)`` matrix of ``tr(i[M(theta), rho_j] H~_l)`` (unscaled ``M``)."""
    prefixes = ansatz.prefixes(theta)
    m_theta = measurement_from_prefixes(prefixes, meas.base)
    return commutator_coefficients(ansatz, prefixes, m_theta, dataset.states)


def scaled_commutators(m_theta: np.ndarray, dataset: TrainingSet, gamma: float) -> np.ndarray:
    """Stack of ``i[gamma M, rho_j]``, shape ``(m, d, d)``; each is Hermitian and traceless."""
    rho = dataset.density_matrices()
    gm = gamma * m_theta
    return 1j * (gm @ rho - rho @ gm)


def k_asym_trace(m_theta: np.ndarray, dataset: TrainingSet, gamma: float = 1.0) -> np.ndarray:
    c = scaled_commutators(m_theta, dataset, gamma)
    k = np.einsum("iab,jba->ij", c, c)
    return _real_part(k, "k_asym")


def k_asym_projection(m_theta: np.ndarray, dataset: TrainingSet, gamma: float = 1.0) -> np.ndarray:
    """``8 gamma^2 Re(u_j^H u_i  w_i^H w_j)`` from the +/- eigenspace projections.

    Only valid for a measurement with eigenvalues ``+1`` and ``-1``.
    """
    w, v = herm_eig(m_theta)
    if np.any(np.abs(np.abs(w) - 1.0) > 1e-8):
        raise ContractError("projection formula needs a measurement with eigenvalues +/-1")
    pos = v[:, w > 0]
    neg = v[:, w < 0]
    # coordinates of u_j, w_j in orthonormal bases of the two eigenspaces
    u = pos.conj().T @ dataset.states.T
    wv = neg.conj().T @ dataset.states.T
    pu = u.conj().T @ u  # pu[i, j] = u_i^H u_j
    nw = wv.conj().T @ wv
    return 8.0 * gamma**2 * np.real(pu.T * nw)


def k_asym(m_theta: np.ndarray, dataset: TrainingSet, gamma: float = 1.0, method: str = "trace") -> np.ndarray:
    """Asymptotic kernel ``tr(i[gamma M, rho_i] i[gamma M, rho_j])`` for unscaled ``M``.

    ``method`` is ``"trace"``, ``"projection"`` or ``"both"``; ``"both"``
    computes the two formulas and raises if they disagree beyond 1e-9
    (relative to the kernel scale).
    """
    if method == "trace":
        return k_asym_trace(m_theta, dataset, gamma)
    if method == "projection":
        return k_asym_projection(m_theta, dataset, gamma)
    if method == "both":
        kt = k_asym_trace(m_theta, dataset, gamma)
        kp = k_asym_projection(m_theta, dataset, gamma)
        dev = float(np.max(np.abs(kt - kp)))
        if dev > 1e-9 * max(1.0, float(np.max(np.abs(kt)))):
            raise ContractError(f"k_asym trace/projection formulas disagree by {dev:.3e}")
        return kt
    raise ValueError(f"unknown method {method!r}")


def _check_cap(d: int, cap: int) -> None:
    if d * d > cap:
        raise ResourceCapError(f"d^2 = {d * d} exceeds the d^2 cap of {cap}; raise the cap explicitly to proceed")


def y_star(d: int, cap: int = DEFAULT_D2_CAP) -> np.ndarray:
    """``W - I/d`` on the doubled space."""
    _check_cap(d, cap)
    return swap_matrix(d) - np.eye(d * d) / d


def y_from_generators(gens: np.ndarray, z: float) -> np.ndarray:
    """``(1/(p Z)) sum_l H~_l (x) H~_l`` from a ``(p, d, d)`` stack."""
    p, d, _ = gens.shape
    flat = gens.reshape(p, d * d)
    # outer[(a,c),(b,e)] = sum_l H_l[a,c] H_l[b,e]; kron index is [(a,b),(c,e)]
    outer = flat.T @ flat
    y = outer.reshape(d, d, d, d).transpose(0, 2, 1, 3).reshape(d * d, d * d)
    return y / (p * z)


def y_matrix(ansatz: PeriodicAnsatz, theta, cap: int = DEFAULT_D2_CAP) -> np.ndarray:
    """``Y(theta) = (1/(p Z)) sum_l H~_l (x) H~_l``."""
    _check_cap(ansatz.dim, cap)
    gens = generators_from_prefixes(ansatz.prefixes(theta), ansatz.generator)
    return y_from_generators(gens, normalization_z(ansatz.generator))


def delta_matrix(ansatz: PeriodicAnsatz, theta, cap: int = DEFAULT_D2_CAP) -> np.ndarray:
    return y_matrix(ansatz, theta, cap) - y_star(ansatz.dim, cap)


def contract_pair_tensor(c: np.ndarray, delta: np.ndarray) -> np.ndarray:
    """``out_ij = tr((C_i (x) C_j) Delta)`` without forming ``C_i (x) C_j``."""
    m, d, _ = c.shape
    d4 = delta.reshape(d, d, d, d)  # [c, e, a, b] with row (c,e), column (a,b)
    # (C_i (x) C_j)[(a,b),(c,e)] = C_i[a,c] C_j[b,e]
    t = np.einsum("iac,ceab->ieb", c, d4, optimize=True)
    k = np.einsum("ieb,jbe->ij", t, c, optimize=True)
    return k


def k_pert(
    ansatz: PeriodicAnsatz,
    theta,
    dataset: TrainingSet,
    gamma: float = 1.0,
    base: np.ndarray | None = None,
    delta: np.ndarray | None = None,
    cap: int = DEFAULT_D2_CAP,
) -> np.ndarray:
    """``tr(i[gamma M, rho_i] (x) i[gamma M, rho_j] Delta)`` with ``Delta = Y(theta) - Y*``.

    ``base`` is the unscaled measurement (Pauli-like by default). A
    precomputed ``delta`` may be supplied, e.g. zero to check the limit.
    """
    _check_cap(ansatz.dim, cap)
    base = ansatz_default_base(ansatz) if base is None else base
    prefixes = ansatz.prefixes(theta)
    m_theta = measurement_from_prefixes(prefixes, base)
    if delta is None:
        gens = generators_from_prefixes(prefixes, ansatz.generator)
        delta = y_from_generators(gens, normalization_z(ansatz.generator)) - y_star(ansatz.dim, cap)
    c = scaled_commutators(m_theta, dataset, gamma)
    return _real_part(contract_pair_tensor(c, delta), "k_pert")


def ansatz_default_base(ansatz: PeriodicAnsatz) -> np.ndarray:
    return build_pauli_like_measurement(ansatz.dim)


def eig_summary(k: np.ndarray) -> tuple[float, float, float]:
    """``(lambda_min, lambda_max, trace)`` of a real symmetric matrix."""
    k = np.asarray(k, dtype=float)
    if k.ndim != 2 or k.shape[0] != k.shape[1]:
        raise ContractError(f"eig_summary needs a square matrix, got {k.shape}")
    scale = max(1.0, float(np.max(np.abs(k))) if k.size else 1.0)
    if np.max(np.abs(k - k.T), initial=0.0) > SYM_TOL * scale:
        raise ContractError("eig_summary input is not symmetric")
    w = np.linalg.eigvalsh(0.5 * (k + k.T))
    return float(w[0]), float(w[-1]), float(np.trace(k))


@dataclass
class KernelSnapshot:
    time: float
    k_full: np.ndarray
    k_asym: np.ndarray
    k_pert: np.ndarray | None = None
    delta_op_norm: float | None = None

    @property
    def lambda_min_asym(self) -> float:
        return eig_summary(self.k_asym)[0]

    @property
    def lambda_max_full(self) -> float:
        return eig_summary(self.k_full)[1]


def kernel_snapshot(
    ansatz: PeriodicAnsatz,
    theta,
    dataset: TrainingSet,
    meas: Measurement,
    time: float = 0.0,
    with_pert: bool = False,
    cap: int = DEFAULT_D2_CAP,
) -> KernelSnapshot:
    """Kernels at one point of a trajectory.

    ``k_full`` is the raw tangent kernel ``K``; the decomposition identity is
    ``k_full / (p Z) = k_asym + k_pert``.
    """
    prefixes = ansatz.prefixes(theta)
    m_theta = measurement_from_prefixes(prefixes, meas.base)
    a = commutator_coefficients(ansatz, prefixes, m_theta, dataset.states)
    kf = meas.gamma**2 * (a.T @ a)
    ka = k_asym_trace(m_theta, dataset, meas.gamma)
    kp = None
    dnorm = None
    if with_pert:
        _check_cap(ansatz.dim, cap)
        gens = generators_from_prefixes(prefixes, ansatz.generator)
        delta = y_from_generators(gens, normalization_z(ansatz.generator)) - y_star(ansatz.dim, cap)
        c = scaled_commutators(m_theta, dataset, meas.gamma)
        kp = _real_part(contract_pair_tensor(c, delta), "k_pert")
        dnorm = op_norm(check_hermitian(delta, tol=1e-9))
    return KernelSnapshot(time, kf, ka, kp, dnorm)
