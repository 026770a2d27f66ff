"""QNN ingredients: periodic ansatz, measurements, predictions and datasets."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .linalg import (
    ContractError,
    DimensionError,
    RngLike,
    as_generator,
    check_hermitian,
    haar_unitary,
    herm_eig,
    is_unitary,
)

NORM_TOL = 1e-12


def _require_even(d: int, what: str) -> None:
    if d < 2 or d % 2:
        raise DimensionError(f"{what} needs an even dimension >= 2, got {d}")


def build_generating_hamiltonian(d: int) -> np.ndarray:
    """Diagonal generator with ``d/2`` entries of ``+sqrt(d - 1/d)`` then ``d/2`` of the negative.

    Normalized so that ``tr(H^2) / (d^2 - 1) == 1``.
    """
    _require_even(d, "generating Hamiltonian")
    a = np.sqrt(d - 1.0 / d)
    return np.diag(np.concatenate([np.full(d // 2, a), np.full(d // 2, -a)])).astype(complex)


def build_pauli_like_measurement(d: int) -> np.ndarray:
    """``diag(+1, ..., +1, -1, ..., -1)`` with equal multiplicities."""
    _require_even(d, "Pauli-like measurement")
    return np.diag(np.concatenate([np.ones(d // 2), -np.ones(d // 2)])).astype(complex)


def normalization_z(h: np.ndarray) -> float:
    """``Z(H, d) = tr(H^2) / (d^2 - 1)``."""
    d = h.shape[0]
    return float(np.real(np.trace(h @ h))) / (d * d - 1)


@dataclass(frozen=True)
class Measurement:
    """Readout observable ``base`` with classical scaling ``gamma``.

    Predictions are ``gamma * tr(rho U^H base U)``, i.e. the QNN measures
    ``gamma * base``.
    """

    base: np.ndarray
    gamma: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "base", check_hermitian(self.base, name="measurement"))
        if not np.isfinite(self.gamma) or self.gamma <= 0:
            raise ContractError(f"gamma must be positive, got {self.gamma}")

    @property
    def dim(self) -> int:
        return self.base.shape[0]

    def is_pauli_like(self, tol: float = 1e-9) -> bool:
        w = np.linalg.eigvalsh(self.base)
        return bool(np.all(np.abs(np.abs(w) - 1.0) <= tol) and abs(np.trace(self.base)) <= tol)

    @classmethod
    def pauli_like(cls, d: int, gamma: float = 1.0) -> "Measurement":
        return cls(build_pauli_like_measurement(d), gamma)


@dataclass(frozen=True, eq=False)
class PeriodicAnsatz:
    """``U_p exp(-i th_p H) ... U_1 exp(-i th_1 H) U_0`` with fixed ``U_l``.

    ``fixed_unitaries`` has shape ``(p + 1, d, d)``.
    """

    generator: np.ndarray
    fixed_unitaries: np.ndarray
    _h_eigvals: np.ndarray = field(init=False, repr=False)
    _h_eigvecs: np.ndarray | None = field(init=False, repr=False)

    def __post_init__(self):
        h = check_hermitian(self.generator, name="generator")
        us = np.asarray(self.fixed_unitaries, dtype=complex)
        if us.ndim != 3 or us.shape[1:] != h.shape or us.shape[0] < 2:
            raise DimensionError(
                f"need (p+1, d, d) fixed unitaries with p >= 1 matching generator {h.shape}, got {us.shape}"
            )
        if abs(np.trace(h)) > 1e-10:
            raise ContractError(f"generator must be traceless, tr H = {np.trace(h):.3e}")
        if not np.any(np.abs(h) > 0):
            raise ContractError("generator must be non-zero")
        for idx, u in enumerate(us):
            if not is_unitary(u):
                raise ContractError(f"fixed unitary U_{idx} is not unitary")
        object.__setattr__(self, "generator", h)
        object.__setattr__(self, "fixed_unitaries", us)
        if np.count_nonzero(h - np.diag(np.diag(h))) == 0:
            object.__setattr__(self, "_h_eigvals", np.real(np.diag(h)).copy())
            object.__setattr__(self, "_h_eigvecs", None)
        else:
            w, v = herm_eig(h)
            object.__setattr__(self, "_h_eigvals", w)
            object.__setattr__(self, "_h_eigvecs", v)

    @property
    def dim(self) -> int:
        return self.generator.shape[0]

    @property
    def num_params(self) -> int:
        return self.fixed_unitaries.shape[0] - 1

    def _check_theta(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.num_params,):
            raise DimensionError(f"theta must have length {self.num_params}, got shape {theta.shape}")
        return theta

    def _apply_layer(self, angle: float, v: np.ndarray) -> np.ndarray:
        """Left-multiply ``v`` by ``exp(-i angle H)``."""
        phases = np.exp(-1j * angle * self._h_eigvals)
        if self._h_eigvecs is None:
            return phases[:, None] * v
        q = self._h_eigvecs
        return q @ (phases[:, None] * (q.conj().T @ v))

    def prefixes(self, theta) -> np.ndarray:
        """Partial products ``V_0 .. V_p`` with ``V_0 = U_0`` and ``V_l = U_l exp(-i th_l H) V_{l-1}``.

        ``V_p`` is the full circuit ``U(theta)`` and ``V_{l-1}`` is the
        prefix that conjugates the ``l``-th generator.
        """
        theta = self._check_theta(theta)
        p, d = self.num_params, self.dim
        out = np.empty((p + 1, d, d), dtype=complex)
        out[0] = self.fixed_unitaries[0]
        for l in range(1, p + 1):
            out[l] = self.fixed_unitaries[l] @ self._apply_layer(theta[l - 1], out[l - 1])
        return out

    def unitary(self, theta) -> np.ndarray:
        return self.prefixes(theta)[-1]


def build_periodic_ansatz(d: int, p: int, rng: RngLike) -> PeriodicAnsatz:
    """Periodic ansatz with ``p + 1`` Haar unitaries drawn in index order."""
    if p < 1:
        raise DimensionError(f"need p >= 1, got {p}")
    h = build_generating_hamiltonian(d)
    gen = as_generator(rng)
    us = np.stack([haar_unitary(d, gen) for _ in range(p + 1)])
    return PeriodicAnsatz(h, us)


def measurement_from_prefixes(prefixes: np.ndarray, base: np.ndarray) -> np.ndarray:
    u = prefixes[-1]
    m = u.conj().T @ base @ u
    return 0.5 * (m + m.conj().T)


def generators_from_prefixes(prefixes: np.ndarray, h: np.ndarray) -> np.ndarray:
    """Stack of ``V_{l-1}^H H V_{l-1}`` for ``l = 1..p``."""
    v = prefixes[:-1]
    vh = np.conj(np.swapaxes(v, 1, 2))
    return vh @ h @ v


def commutator_coefficients(
    ansatz: PeriodicAnsatz, prefixes: np.ndarray, m_theta: np.ndarray, states: np.ndarray
) -> np.ndarray:
    """Matrix ``A`` of shape ``(p, m)`` with ``A[l, j] = tr(i[M, rho_j] H~_l)``.

    Uses the rank-one structure of pure states:
    ``tr(i[M, v v^H] H~) = -2 Im(v^H H~ M v)``, evaluated in the eigenframe of
    ``H`` so each layer costs ``O(d^2 m)``.
    """
    v = prefixes[:-1]
    if ansatz._h_eigvecs is not None:
        v = ansatz._h_eigvecs.conj().T @ v
    x = v @ states.T
    y = v @ (m_theta @ states.T)
    lam = ansatz._h_eigvals[None, :, None]
    return -2.0 * np.imag(np.sum(lam * x.conj() * y, axis=1))


def parameterized_measurement(ansatz: PeriodicAnsatz, theta, meas: Measurement | np.ndarray) -> np.ndarray:
    """Unscaled ``M(theta) = U(theta)^H M0 U(theta)``."""
    base = meas.base if isinstance(meas, Measurement) else check_hermitian(meas, name="measurement")
    if base.shape != ansatz.generator.shape:
        raise DimensionError(f"measurement shape {base.shape} does not match ansatz dim {ansatz.dim}")
    return measurement_from_prefixes(ansatz.prefixes(theta), base)


def conjugated_generators(ansatz: PeriodicAnsatz, theta) -> np.ndarray:
    """The ``p`` conjugated generators, shape ``(p, d, d)``.

    ``H~_l = U_0^H U_{1:l-1}^H H U_{1:l-1} U_0``; ``H~_1`` is conjugated by
    ``U_0`` only.
    """
    return generators_from_prefixes(ansatz.prefixes(theta), ansatz.generator)


def predict(m_theta: np.ndarray, state, gamma: float = 1.0) -> float:
    """``gamma * v^H M v`` for a normalized state vector ``v``."""
    v = np.asarray(state, dtype=complex)
    nrm = np.linalg.norm(v)
    if abs(nrm - 1.0) > 1e-10:
        raise ContractError(f"state must be normalized, |v| = {nrm}")
    return float(gamma * np.real(np.vdot(v, m_theta @ v)))


def predictions(m_theta: np.ndarray, states: np.ndarray, gamma: float = 1.0) -> np.ndarray:
    """Vectorized :func:`predict` over the rows of ``states`` (shape ``(m, d)``)."""
    mv = states @ m_theta.T
    return gamma * np.real(np.sum(states.conj() * mv, axis=1))


@dataclass(frozen=True, eq=False)
class TrainingSet:
    """``m`` pure states (rows of ``states``) with real labels."""

    states: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        states = np.atleast_2d(np.asarray(self.states, dtype=complex))
        labels = np.asarray(self.labels, dtype=float).reshape(-1)
        if states.shape[0] != labels.shape[0]:
            raise DimensionError(f"{states.shape[0]} states but {labels.shape[0]} labels")
        norms = np.linalg.norm(states, axis=1)
        if np.any(np.abs(norms - 1.0) > NORM_TOL):
            raise ContractError(f"state vectors must be normalized, norms = {norms}")
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "labels", labels)

    @property
    def dim(self) -> int:
        return self.states.shape[1]

    @property
    def size(self) -> int:
        return self.states.shape[0]

    def density_matrices(self) -> np.ndarray:
        return np.einsum("ja,jb->jab", self.states, self.states.conj())

    def weighted_sum(self, weights) -> np.ndarray:
        """``sum_j w_j rho_j``."""
        w = np.asarray(weights, dtype=float)
        return (self.states.T * w) @ self.states.conj()

    def gram(self) -> np.ndarray:
        return self.states.conj() @ self.states.T


def sample_orthogonal_dataset(d: int, m: int, rng: RngLike, balanced: bool = True) -> TrainingSet:
    """``m`` orthonormal states from the first columns of a Haar unitary.

    With ``balanced`` and even ``m`` exactly half the labels are ``+1`` (in
    random positions); otherwise labels are i.i.d. uniform on ``{+1, -1}``.
    """
    if m < 1:
        raise DimensionError(f"need m >= 1, got {m}")
    if m > d:
        raise DimensionError(f"cannot fit {m} orthogonal states in dimension {d}")
    gen = as_generator(rng)
    u = haar_unitary(d, gen)
    states = u[:, :m].T.copy()
    if balanced and m % 2 == 0:
        labels = np.array([1.0] * (m // 2) + [-1.0] * (m // 2))
        labels = gen.permutation(labels)
    else:
        labels = gen.choice([-1.0, 1.0], size=m)
    return TrainingSet(states, labels)
