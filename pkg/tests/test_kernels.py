import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qnndyn.kernels import (
    ResourceCapError,
    coefficient_matrix,
    contract_pair_tensor,
    delta_matrix,
    eig_summary,
    k_asym,
    k_asym_projection,
    k_asym_trace,
    k_pert,
    kernel_snapshot,
    tangent_kernel,
    y_from_generators,
    y_matrix,
    y_star,
)
from qnndyn.linalg import ContractError, RngStream, kron, swap_matrix
from qnndyn.model import (
    Measurement,
    TrainingSet,
    build_periodic_ansatz,
    conjugated_generators,
    normalization_z,
    parameterized_measurement,
    sample_orthogonal_dataset,
)
from qnndyn.train import forward, grad

from conftest import random_hermitian


def instance(d, p, m, gamma=1.0, seed=0):
    rs = RngStream(seed)
    ans = build_periodic_ansatz(d, p, rs.child(1))
    ds = sample_orthogonal_dataset(d, m, rs.child(2))
    theta = rs.child(3).generator().uniform(-np.pi, np.pi, p)
    return ans, ds, Measurement.pauli_like(d, gamma), theta


def fd_jacobian(ans, theta, ds, meas, h=1e-6):
    cols = []
    for e in np.eye(theta.size):
        hi = forward(ans, theta + h * e, ds, meas).predictions
        lo = forward(ans, theta - h * e, ds, meas).predictions
        cols.append((hi - lo) / (2 * h))
    return np.array(cols).T  # (m, p)


def test_tangent_kernel_is_jacobian_gram():
    ans, ds, meas, theta = instance(4, 6, 3, gamma=1.7, seed=1)
    jac = fd_jacobian(ans, theta, ds, meas)
    k = tangent_kernel(ans, theta, ds, meas)
    assert np.allclose(k, jac @ jac.T, atol=1e-7)
    a = coefficient_matrix(ans, theta, ds, meas)
    assert np.allclose(meas.gamma * a.T, jac, atol=1e-7)


@settings(max_examples=20, deadline=None)
@given(st.sampled_from([2, 4, 6]), st.integers(1, 12), st.integers(1, 3), st.floats(0.5, 3.0), st.integers(0, 10**6))
def test_kernel_split_identity(d, p, m, gamma, seed):
    m = min(m, d)
    ans, ds, meas, theta = instance(d, p, m, gamma, seed)
    m_theta = parameterized_measurement(ans, theta, meas)
    lhs = tangent_kernel(ans, theta, ds, meas) / (p * normalization_z(ans.generator))
    rhs = k_asym_trace(m_theta, ds, gamma) + k_pert(ans, theta, ds, gamma)
    assert np.max(np.abs(lhs - rhs)) < 1e-9 * max(1.0, gamma**2)


def test_k_pert_vanishes_for_zero_delta():
    ans, ds, meas, theta = instance(4, 5, 2)
    assert np.allclose(k_pert(ans, theta, ds, delta=np.zeros((16, 16))), 0)


def test_k_asym_routes_agree_and_are_psd():
    ans, ds, meas, theta = instance(8, 4, 4, seed=2)
    m_theta = parameterized_measurement(ans, theta, meas)
    kt = k_asym_trace(m_theta, ds, 2.5)
    assert np.allclose(kt, k_asym_projection(m_theta, ds, 2.5), atol=1e-10)
    assert np.allclose(k_asym(m_theta, ds, 2.5, "both"), kt)
    assert np.linalg.eigvalsh(kt)[0] > -1e-10
    assert np.allclose(kt, kt.T)
    with pytest.raises(ValueError):
        k_asym(m_theta, ds, 1.0, "nope")
    with pytest.raises(ContractError):
        k_asym_projection(2 * m_theta, ds)


def test_k_asym_single_sample_scalar():
    # m = 1: K_asym = 2 (gamma^2 - yhat^2) for a measurement with M^2 = gamma^2 I
    ans, ds, meas, theta = instance(6, 3, 1, seed=3)
    for gamma in [1.0, 2.0, 4.0]:
        m_theta = parameterized_measurement(ans, theta, meas)
        yhat = gamma * np.real(ds.states[0].conj() @ m_theta @ ds.states[0])
        assert np.isclose(k_asym_trace(m_theta, ds, gamma)[0, 0], 2 * (gamma**2 - yhat**2))


def test_y_star_matches_swap_definition():
    for d in [2, 3, 4]:
        assert np.allclose(y_star(d), swap_matrix(d) - np.eye(d * d) / d)
    with pytest.raises(ResourceCapError):
        y_star(8, cap=16)


def test_y_from_generators_matches_explicit_kron():
    gen = np.random.default_rng(4)
    hs = np.stack([random_hermitian(gen, 3) for _ in range(4)])
    explicit = sum(kron(h, h) for h in hs) / (4 * 1.7)
    assert np.allclose(y_from_generators(hs, 1.7), explicit)


def test_y_matrix_uses_conjugated_generators():
    ans, _, _, theta = instance(4, 6, 1, seed=5)
    gens = conjugated_generators(ans, theta)
    explicit = sum(kron(h, h) for h in gens) / (6 * normalization_z(ans.generator))
    assert np.allclose(y_matrix(ans, theta), explicit)
    assert np.allclose(delta_matrix(ans, theta), explicit - y_star(4))
    with pytest.raises(ResourceCapError):
        y_matrix(ans, theta, cap=8)


def test_y_concentrates_to_y_star_in_expectation():
    # average of H~ (x) H~ over Haar-conjugated traceless H with Z = 1 is W - I/d
    d = 2
    acc = np.zeros((d * d, d * d), dtype=complex)
    n = 400
    for s in range(n):
        ans = build_periodic_ansatz(d, 1, RngStream(s))
        acc += y_matrix(ans, np.zeros(1))
    assert np.max(np.abs(acc / n - y_star(d))) < 0.1


def test_contract_pair_tensor_matches_explicit_trace():
    gen = np.random.default_rng(6)
    c = np.stack([random_hermitian(gen, 3) for _ in range(3)])
    delta = random_hermitian(gen, 9)
    out = contract_pair_tensor(c, delta)
    explicit = np.array([[np.trace(kron(ci, cj) @ delta) for cj in c] for ci in c])
    assert np.allclose(out, explicit)


def test_eig_summary():
    k = np.array([[2.0, 1.0], [1.0, 2.0]])
    assert np.allclose(eig_summary(k), (1.0, 3.0, 4.0))
    with pytest.raises(ContractError):
        eig_summary(np.array([[1.0, 2.0], [0.0, 1.0]]))
    with pytest.raises(ContractError):
        eig_summary(np.zeros((2, 3)))


def test_kernel_snapshot_consistency():
    ans, ds, meas, theta = instance(4, 10, 2, seed=7)
    snap = kernel_snapshot(ans, theta, ds, meas, with_pert=True)
    assert np.allclose(snap.k_full / 10, snap.k_asym + snap.k_pert, atol=1e-10)
    assert snap.delta_op_norm > 0
    assert snap.lambda_max_full == pytest.approx(np.linalg.eigvalsh(snap.k_full)[-1])


def test_one_gradient_step_moves_residuals_by_kernel():
    ans, ds, meas, theta = instance(4, 8, 3, gamma=1.5, seed=8)
    eta = 1e-6
    r0 = ds.labels - forward(ans, theta, ds, meas).predictions
    r1 = ds.labels - forward(ans, theta - eta * grad(ans, theta, ds, meas), ds, meas).predictions
    k = tangent_kernel(ans, theta, ds, meas)
    assert np.allclose(r1 - r0, -(eta / ds.size) * k @ r0, atol=1e-10)


def test_imaginary_residue_is_rejected():
    ds = TrainingSet(np.eye(2, dtype=complex), [1.0, -1.0])
    with pytest.raises(ContractError):
        k_asym_trace(np.array([[0, 1], [1j, 0]]), ds)
