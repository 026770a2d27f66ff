"""Infinite-parameter measurement dynamics and global-minimum statistics.

The asymptotic flow evolves the scaled measurement ``M`` (eigenvalues
``+/-gamma``) as ``dM/dt = sum_j r_j [M, [M, rho_j]]`` with
``r_j = y_j - tr(M rho_j)``, so that ``dr/dt = -K_asym r``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .linalg import ContractError, DimensionError, RngLike, as_generator, haar_unitary, hermitize, op_norm
from .model import TrainingSet, build_pauli_like_measurement, predictions
from .kernels import eig_summary, k_asym_trace
from .train import NumericalAbort

DRIFT_ABORT = 1e-4


class SpectrumDriftError(NumericalAbort):
    """Integrator drift moved the spectrum of ``M`` beyond tolerance."""


@dataclass
class AsymState:
    """One point of the asymptotic flow; ``measurement`` is the gamma-scaled ``M``."""

    time: float
    measurement: np.ndarray
    residuals: np.ndarray

    @property
    def loss(self) -> float:
        r = self.residuals
        return float(r @ r) / (2 * r.size)


def init_asym_measurement(d: int, gamma: float, rng: RngLike) -> np.ndarray:
    """``gamma U diag(+1, .., -1) U^H`` with a Haar-random ``U``."""
    m0 = build_pauli_like_measurement(d)
    u = haar_unitary(d, as_generator(rng))
    return hermitize(gamma * (u @ m0 @ u.conj().T))


def asym_state(m_scaled: np.ndarray, dataset: TrainingSet, time: float = 0.0) -> AsymState:
    yhat = predictions(m_scaled, dataset.states, 1.0)
    return AsymState(time, m_scaled, dataset.labels - yhat)


def asym_rhs(m_scaled: np.ndarray, dataset: TrainingSet) -> np.ndarray:
    """``sum_j r_j [M, [M, rho_j]]`` for the scaled measurement ``M``."""
    s = dataset.states.T  # columns v_j
    ms = m_scaled @ s
    r = dataset.labels - np.real(np.sum(s.conj() * ms, axis=0))
    # with R = S diag(r) S^H: M^2 R + R M^2 - 2 M R M, all rank <= 2m
    mms = m_scaled @ ms
    out = (mms * r) @ s.conj().T
    out = out + out.conj().T - 2.0 * (ms * r) @ ms.conj().T
    return hermitize(out)


def prediction_rates(m_scaled: np.ndarray, dataset: TrainingSet) -> np.ndarray:
    """``d yhat_j / dt = tr(rho_j dM/dt)`` along the flow."""
    return predictions(asym_rhs(m_scaled, dataset), dataset.states, 1.0)


@dataclass
class AsymTrajectory:
    states: list[AsymState] = field(default_factory=list)
    step: float = 0.0
    initial_spectrum: np.ndarray | None = None
    max_spectrum_drift: float = 0.0

    @property
    def times(self) -> np.ndarray:
        return np.array([s.time for s in self.states])

    @property
    def losses(self) -> np.ndarray:
        return np.array([s.loss for s in self.states])

    def predictions(self, dataset: TrainingSet) -> np.ndarray:
        return np.array([dataset.labels - s.residuals for s in self.states])

    def __len__(self) -> int:
        return len(self.states)


def _rk4_step(m: np.ndarray, dataset: TrainingSet, h: float) -> np.ndarray:
    k1 = asym_rhs(m, dataset)
    k2 = asym_rhs(m + 0.5 * h * k1, dataset)
    k3 = asym_rhs(m + 0.5 * h * k2, dataset)
    k4 = asym_rhs(m + h * k3, dataset)
    return hermitize(m + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4))


def integrate_asym(
    initial: AsymState | np.ndarray,
    dataset: TrainingSet,
    t_end: float,
    step: float | None = None,
    log_every: int = 1,
    check_every: int = 1,
    drift_abort: float = DRIFT_ABORT,
) -> AsymTrajectory:
    """Fixed-step classical RK4 integration of the asymptotic flow.

    The default ``step`` is ``1e-3 / gamma^2`` with ``gamma`` read off the
    spectrum of the initial measurement. ``step`` is shrunk slightly so that
    an integer number of steps lands on ``t_end``. The sorted spectrum of
    ``M`` is compared with the initial one every ``check_every`` steps; drift
    above ``drift_abort`` raises :class:`SpectrumDriftError`.
    """
    if isinstance(initial, AsymState):
        m, t0 = initial.measurement, initial.time
    else:
        m, t0 = np.asarray(initial, dtype=complex), 0.0
    if step is None:
        step = default_step(measurement_scale(m))
    if step <= 0:
        raise ContractError(f"step must be positive, got {step}")
    if t_end < 0:
        raise ContractError(f"t_end must be non-negative, got {t_end}")
    if m.shape != (dataset.dim, dataset.dim):
        raise DimensionError(f"measurement {m.shape} does not match dataset dim {dataset.dim}")
    n = max(1, int(np.ceil(t_end / step - 1e-9))) if t_end > 0 else 0
    h = t_end / n if n else step
    spec0 = np.linalg.eigvalsh(m)
    traj = AsymTrajectory(step=h, initial_spectrum=spec0)
    traj.states.append(asym_state(m, dataset, t0))
    for k in range(1, n + 1):
        m = _rk4_step(m, dataset, h)
        if not np.all(np.isfinite(m)):
            raise NumericalAbort(f"non-finite measurement at step {k}")
        if k % check_every == 0 or k == n:
            drift = float(np.max(np.abs(np.linalg.eigvalsh(m) - spec0)))
            traj.max_spectrum_drift = max(traj.max_spectrum_drift, drift)
            if drift > drift_abort:
                raise SpectrumDriftError(f"spectrum drift {drift:.3e} > {drift_abort:.1e} at t = {t0 + k * h:.4g}")
        if k % log_every == 0 or k == n:
            traj.states.append(asym_state(m, dataset, t0 + k * h))
    return traj


def default_step(gamma: float) -> float:
    return 1e-3 / gamma**2


def measurement_scale(m_scaled: np.ndarray) -> float:
    """``gamma`` of a scaled measurement, i.e. its largest absolute eigenvalue."""
    return float(np.max(np.abs(np.linalg.eigvalsh(m_scaled))))


def step_halving_error(initial: AsymState | np.ndarray, dataset: TrainingSet, t_end: float, step: float) -> float:
    """Relative difference of the final residuals at ``step`` and ``step / 2``."""
    r1 = integrate_asym(initial, dataset, t_end, step, log_every=10**9).states[-1].residuals
    r2 = integrate_asym(initial, dataset, t_end, step / 2, log_every=10**9).states[-1].residuals
    return float(np.linalg.norm(r1 - r2) / max(np.linalg.norm(r2), 1e-300))


def track_lambda_min(trajectory: AsymTrajectory, dataset: TrainingSet) -> tuple[np.ndarray, np.ndarray]:
    """``(times, lambda_min(K_asym(t)))`` over the logged states."""
    lam = np.array([eig_summary(k_asym_trace(s.measurement, dataset, 1.0))[0] for s in trajectory.states])
    return trajectory.times, lam


def relative_kernel_change(trajectory: AsymTrajectory, dataset: TrainingSet) -> np.ndarray:
    """``||K_asym(t) - K_asym(0)||_F / ||K_asym(0)||_F`` per logged state."""
    ks = [k_asym_trace(s.measurement, dataset, 1.0) for s in trajectory.states]
    k0 = ks[0]
    n0 = np.linalg.norm(k0)
    return np.array([np.linalg.norm(k - k0) / n0 for k in ks])


# -- global minima -----------------------------------------------------------


def structure_matrix(m: int, gamma: float) -> np.ndarray:
    """Block matrix ``R`` for ``m/2`` positive labels followed by ``m/2`` negative."""
    h = m // 2
    r = np.empty((m, m))
    r[:h, :h] = 0.5 * (1 + 1 / gamma)
    r[h:, h:] = 0.5 * (1 - 1 / gamma)
    r[:h, h:] = 0.5 * np.sqrt(1 - 1 / gamma**2)
    r[h:, :h] = r[:h, h:]
    return r


def minimum_diagonal(gamma: float) -> float:
    """``2 gamma^2 (1 - 1/gamma^2)``, the diagonal of ``K_asym`` at any global minimum."""
    return 2 * gamma**2 * (1 - 1 / gamma**2)


def positive_weights(m: int, gamma: float) -> np.ndarray:
    """``|u_j|^2 = (1 +/- 1/gamma) / 2`` for ``m/2`` positive then ``m/2`` negative labels."""
    h = m // 2
    return np.array([0.5 * (1 + 1 / gamma)] * h + [0.5 * (1 - 1 / gamma)] * (m - h))


def squared_overlap_weights(m: int, gamma: float) -> np.ndarray:
    """``W_ij = |u_i|^2 |u_j|^2`` so that ``|u_i^H u_j|^2 = W_ij |G_ij|^2`` at a minimum."""
    norms = positive_weights(m, gamma)
    return np.outer(norms, norms)


@dataclass
class GlobalMinimumSample:
    """A sampled zero-loss configuration.

    ``k_asym_at_min`` is the exact asymptotic kernel,
    ``c I - 8 gamma^2 W o (G - I) o (G^T - I)`` with the squared-overlap
    weights ``W``; ``k_asym_block_form`` is the same expression with the
    three-block matrix ``R`` in place of ``W``. The two share the diagonal and
    agree up to the off-diagonal weights. ``lambda_g`` comes from the exact
    kernel and ``lambda_g_block`` from the block form.
    """

    gamma: float
    dim: int
    unit_directions: np.ndarray  # (m, d/2) rows are the unit vectors in the positive eigenspace
    labels: np.ndarray
    gram_g: np.ndarray
    structure_r: np.ndarray
    k_asym_at_min: np.ndarray
    lambda_g: float
    k_asym_block_form: np.ndarray
    lambda_g_block: float
    rejections: int = 0

    def embed(self) -> tuple[np.ndarray, TrainingSet]:
        """Explicit ``(M, dataset)`` realising this minimum.

        ``M`` is the unscaled ``diag(+1.., -1..)``. Each state is
        ``v_j = u_j + w_j`` with ``u_j = sqrt((1 +/- 1/gamma)/2) u^_j`` in the
        positive eigenspace and ``w_j`` completed in the negative eigenspace so
        that ``w_i^H w_j = delta_ij - u_i^H u_j``.
        """
        d, g = self.dim, self.gamma
        half = d // 2
        scale = np.sqrt(positive_weights(self.labels.size, g))
        u = self.unit_directions * scale[:, None]
        m = u.shape[0]
        p_gram = u.conj() @ u.T  # P[i, j] = u_i^H u_j
        n_gram = np.eye(m) - p_gram
        n_gram = 0.5 * (n_gram + n_gram.conj().T)
        w_eig, q = np.linalg.eigh(n_gram)
        if w_eig[0] < -1e-12:
            raise ContractError(f"negative-subspace Gram matrix is not PSD (lambda_min = {w_eig[0]:.3e})")
        # coordinates c with c^H c = N, i.e. w_j = column j of sqrt(N)
        root = (q * np.sqrt(np.clip(w_eig, 0, None))) @ q.conj().T
        w = np.zeros((m, half), dtype=complex)
        w[:, :m] = root.T
        states = np.concatenate([u, w], axis=1)
        return build_pauli_like_measurement(d), TrainingSet(states, self.labels)


def _closed_form_k(r: np.ndarray, g_mat: np.ndarray, gamma: float) -> np.ndarray:
    eye = np.eye(r.shape[0])
    off = np.real((g_mat - eye) * (g_mat.T - eye))
    return minimum_diagonal(gamma) * eye - 8 * gamma**2 * r * off


def _check_minimum_args(d: int, m: int, gamma: float) -> None:
    if m < 2 or m % 2:
        raise DimensionError(f"m must be even and >= 2, got {m}")
    if d % 2 or m > d // 2:
        raise DimensionError(f"need even d with m <= d/2, got d={d}, m={m}")
    if gamma <= 1:
        raise ContractError(f"global minima with |yhat| = 1 need gamma > 1, got {gamma}")


def is_feasible(unit_directions: np.ndarray, gamma: float) -> bool:
    """Whether a zero-loss configuration exists for these positive-eigenspace directions.

    It does iff the positive-part Gram matrix ``P_ij = u_i^H u_j`` has
    ``||P|| <= 1``, so that ``I - P`` is a valid Gram matrix for the ``w_j``.
    """
    m = unit_directions.shape[0]
    scale = np.sqrt(positive_weights(m, gamma))
    g_mat = unit_directions.conj() @ unit_directions.T
    p_gram = scale[:, None] * g_mat * scale[None, :]
    return bool(np.linalg.eigvalsh(p_gram)[-1] <= 1.0 + 1e-12)


def global_minimum_from_directions(unit_directions: np.ndarray, d: int, gamma: float, rejections: int = 0) -> GlobalMinimumSample:
    """Global minimum for given unit directions (rows, ``m/2`` positive labels first)."""
    uhat = np.asarray(unit_directions, dtype=complex)
    m = uhat.shape[0]
    _check_minimum_args(d, m, gamma)
    if uhat.shape[1] != d // 2:
        raise DimensionError(f"directions must live in dimension d/2 = {d // 2}, got {uhat.shape[1]}")
    if np.any(np.abs(np.linalg.norm(uhat, axis=1) - 1) > 1e-12):
        raise ContractError("directions must be unit vectors")
    labels = np.array([1.0] * (m // 2) + [-1.0] * (m // 2))
    g_mat = uhat.conj() @ uhat.T
    r = structure_matrix(m, gamma)
    k = _closed_form_k(squared_overlap_weights(m, gamma), g_mat, gamma)
    kb = _closed_form_k(r, g_mat, gamma)
    lam = float(np.linalg.eigvalsh(k)[0])
    lam_b = float(np.linalg.eigvalsh(kb)[0])
    return GlobalMinimumSample(gamma, d, uhat, labels, g_mat, r, k, lam, kb, lam_b, rejections)


def sample_global_minimum(d: int, m: int, gamma: float, rng: RngLike, max_tries: int = 1000) -> GlobalMinimumSample:
    """Draw a global minimum under the uniform measure over unit directions.

    Directions for which no zero-loss configuration exists are rejected and
    redrawn (see :func:`is_feasible`); this only happens when ``m^2 / d`` is
    not small.
    """
    _check_minimum_args(d, m, gamma)
    gen = as_generator(rng)
    half = d // 2
    for rejections in range(max_tries):
        z = gen.standard_normal((m, half)) + 1j * gen.standard_normal((m, half))
        uhat = z / np.linalg.norm(z, axis=1, keepdims=True)
        if is_feasible(uhat, gamma):
            return global_minimum_from_directions(uhat, d, gamma, rejections)
    raise ContractError(f"no feasible global minimum in {max_tries} draws (d={d}, m={m}, gamma={gamma})")


def lambda_g_statistics(d: int, m: int, gamma: float, num_samples: int, rng: RngLike, eps: float = 0.1) -> dict:
    """Empirical distribution of ``lambda_g`` over sampled global minima."""
    if num_samples < 1:
        raise ContractError("num_samples must be >= 1")
    gen = as_generator(rng)
    samples = [sample_global_minimum(d, m, gamma, gen) for _ in range(num_samples)]
    lam = np.array([smp.lambda_g for smp in samples])
    lam_b = np.array([smp.lambda_g_block for smp in samples])
    ref = minimum_diagonal(gamma)
    qs = np.quantile(lam, [0.0, 0.05, 0.25, 0.5, 0.75, 0.95, 1.0])
    return {
        "d": d,
        "m": m,
        "gamma": gamma,
        "num_samples": num_samples,
        "reference": ref,
        "eps": eps,
        "min": float(qs[0]),
        "q05": float(qs[1]),
        "q25": float(qs[2]),
        "median": float(qs[3]),
        "q75": float(qs[4]),
        "q95": float(qs[5]),
        "max": float(qs[6]),
        "mean": float(lam.mean()),
        "fraction_above": float(np.mean(lam >= ref * (1 - eps))),
        "median_block": float(np.median(lam_b)),
        "samples": lam,
    }


def hadamard_opnorm_bound_check(a: np.ndarray, b: np.ndarray) -> bool:
    """Whether ``||A o B|| <= ||A|| ||B||`` (plus 1e-10) for Hermitian ``A``, ``B``."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise DimensionError(f"shape mismatch {a.shape} vs {b.shape}")
    return op_norm(a * b) <= op_norm(a) * op_norm(b) + 1e-10
