"""Dense complex linear algebra for Hermitian operators.

Matrices are plain ``numpy.ndarray`` objects of dtype ``complex128``. The
helpers here check the Hermitian/unitary contracts at the boundaries and
otherwise stay out of the way.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np
import scipy.sparse.linalg as spla

HERMITIAN_TOL = 1e-12
UNITARY_TOL = 1e-10
# above this dimension op_norm may fall back to an iterative estimate
DENSE_NORM_MAX_DIM = 1024


class DimensionError(ValueError):
    """Operands have incompatible or invalid dimensions."""


class ContractError(ValueError):
    """An input violates a documented precondition (e.g. not Hermitian)."""


@dataclass(frozen=True)
class RngStream:
    """Reproducible random stream keyed by ``(seed, stream_id)``.

    Each call to :meth:`generator` returns a fresh generator positioned at
    the start of the stream, so two calls with equal keys draw identical
    sequences.
    """

    seed: int
    stream_id: int = 0

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream_id,))
        return np.random.Generator(np.random.PCG64(ss))

    def child(self, stream_id: int) -> "RngStream":
        return RngStream(self.seed, stream_id)


RngLike = Union[RngStream, np.random.Generator]


def as_generator(rng: RngLike) -> np.random.Generator:
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    raise TypeError(f"expected RngStream or numpy Generator, got {type(rng).__name__}")


def is_hermitian(a: np.ndarray, tol: float = HERMITIAN_TOL) -> bool:
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        return False
    return bool(np.all(np.abs(a - a.conj().T) <= tol))


def check_hermitian(a: np.ndarray, tol: float = HERMITIAN_TOL, name: str = "matrix") -> np.ndarray:
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {a.shape}")
    dev = np.max(np.abs(a - a.conj().T)) if a.size else 0.0
    if dev > tol:
        raise ContractError(f"{name} is not Hermitian (max |A - A^H| = {dev:.3e} > {tol:.1e})")
    return a


def is_unitary(u: np.ndarray, tol: float = UNITARY_TOL) -> bool:
    u = np.asarray(u)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        return False
    return bool(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))) <= tol)


def hermitize(a: np.ndarray) -> np.ndarray:
    """Project onto the Hermitian part, removing round-off asymmetry."""
    return 0.5 * (a + a.conj().T)


def commutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Return ``AB - BA``. Anti-Hermitian when both inputs are Hermitian."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape != b.shape:
        raise DimensionError(f"commutator needs equal square operands, got {a.shape} and {b.shape}")
    return a @ b - b @ a


def herm_eig(h: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a Hermitian matrix.

    Returns ``(eigenvalues, eigenvectors)`` with eigenvalues real and
    ascending, and eigenvectors as the columns of a unitary ``V`` such that
    ``h = V @ diag(eigenvalues) @ V^H``.
    """
    h = check_hermitian(h, name="herm_eig input")
    w, v = np.linalg.eigh(h)
    return w, v


def expm_antiherm(h: np.ndarray, angle: float) -> np.ndarray:
    """Compute ``exp(-i * angle * h)`` for Hermitian ``h`` via its spectrum."""
    w, v = herm_eig(h)
    return (v * np.exp(-1j * angle * w)) @ v.conj().T


def haar_unitary(d: int, rng: RngLike, special: bool = False) -> np.ndarray:
    """Draw a Haar-random ``d x d`` unitary (Mezzadri's QR construction).

    With ``special=True`` the result is multiplied by a global phase so that
    ``det U = 1``. The global phase cancels in every conjugation ``U^H M U``
    used downstream, so the default leaves it alone.
    """
    if d < 1:
        raise DimensionError(f"dimension must be >= 1, got {d}")
    gen = as_generator(rng)
    z = (gen.standard_normal((d, d)) + 1j * gen.standard_normal((d, d))) / np.sqrt(2.0)
    q, r = np.linalg.qr(z)
    diag = np.diag(r)
    q = q * (diag / np.abs(diag))
    if special:
        det = np.linalg.det(q)
        q = q * np.exp(-1j * np.angle(det) / d)
    return q


def op_norm(a: np.ndarray, return_method: bool = False):
    """Operator norm ``max |lambda_i|`` of a Hermitian matrix.

    Dense eigenvalues are used up to ``DENSE_NORM_MAX_DIM``; beyond that an
    ARPACK Lanczos estimate (relative tolerance 1e-6) is used. With
    ``return_method=True`` a ``(value, method)`` pair is returned where
    method is ``"dense"`` or ``"lanczos"``.
    """
    a = check_hermitian(a, tol=1e-9, name="op_norm input")
    d = a.shape[0]
    if d == 0:
        val, method = 0.0, "dense"
    elif d <= DENSE_NORM_MAX_DIM:
        val, method = float(np.max(np.abs(np.linalg.eigvalsh(a)))), "dense"
    else:
        if not np.any(a):
            val = 0.0
        else:
            ev = spla.eigsh(a, k=1, which="LM", tol=1e-6, return_eigenvectors=False)
            val = float(np.abs(ev[0]))
        method = "lanczos"
    return (val, method) if return_method else val


def kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.kron(np.asarray(a), np.asarray(b))


def swap_matrix(d: int) -> np.ndarray:
    """The ``d^2 x d^2`` swap ``sum_{a,b} e_a e_b^H (x) e_b e_a^H``."""
    if d < 1:
        raise DimensionError(f"dimension must be >= 1, got {d}")
    w = np.zeros((d * d, d * d), dtype=complex)
    a, b = np.meshgrid(np.arange(d), np.arange(d), indexing="ij")
    # (e_a e_b^H) (x) (e_b e_a^H) has its single 1 at row a*d+b, column b*d+a
    w[(a * d + b).ravel(), (b * d + a).ravel()] = 1.0
    return w
