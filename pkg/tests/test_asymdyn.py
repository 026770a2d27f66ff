import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import solve_ivp

from qnndyn.asymdyn import (
    SpectrumDriftError,
    asym_rhs,
    asym_state,
    default_step,
    global_minimum_from_directions,
    hadamard_opnorm_bound_check,
    init_asym_measurement,
    integrate_asym,
    is_feasible,
    lambda_g_statistics,
    measurement_scale,
    minimum_diagonal,
    positive_weights,
    prediction_rates,
    relative_kernel_change,
    sample_global_minimum,
    squared_overlap_weights,
    step_halving_error,
    structure_matrix,
    track_lambda_min,
)
from qnndyn.kernels import k_asym_projection, k_asym_trace
from qnndyn.linalg import ContractError, DimensionError, RngStream, commutator
from qnndyn.model import TrainingSet, predictions, sample_orthogonal_dataset
from qnndyn.train import NumericalAbort


def setup(d=8, m=2, gamma=2.0, seed=0, balanced=True):
    rs = RngStream(seed)
    ds = sample_orthogonal_dataset(d, m, rs.child(1), balanced=balanced)
    return init_asym_measurement(d, gamma, rs.child(3)), ds


def scalar_instance(gamma):
    """One sample with yhat(0) = 0 and label +1."""
    ds = TrainingSet(np.array([[1.0, 1.0]]) / np.sqrt(2), [1.0])
    return gamma * np.diag([1.0, -1.0]).astype(complex), ds


# -- initialisation and right-hand side ---------------------------------------


def test_init_measurement_spectrum():
    m = init_asym_measurement(6, 3.0, RngStream(1))
    assert np.allclose(np.linalg.eigvalsh(m), [-3, -3, -3, 3, 3, 3])
    assert abs(np.trace(m)) < 1e-12
    assert np.array_equal(m, init_asym_measurement(6, 3.0, RngStream(1)))
    assert measurement_scale(m) == pytest.approx(3.0)
    with pytest.raises(DimensionError):
        init_asym_measurement(5, 1.0, RngStream(0))


def test_rhs_matches_double_commutator():
    m, ds = setup(d=6, m=3, gamma=1.5, seed=2)
    r = ds.labels - predictions(m, ds.states)
    expected = sum(rj * commutator(m, commutator(m, rho)) for rj, rho in zip(r, ds.density_matrices()))
    assert np.allclose(asym_rhs(m, ds), expected)


@settings(max_examples=20, deadline=None)
@given(st.sampled_from([2, 4, 8]), st.integers(1, 2), st.floats(0.5, 4.0), st.integers(0, 10**6))
def test_rhs_is_hermitian_and_isospectral(d, m, gamma, seed):
    mm, ds = setup(d, m, gamma, seed)
    rhs = asym_rhs(mm, ds)
    assert np.allclose(rhs, rhs.conj().T)
    # tr(dM/dt M^k) = 0 keeps every power trace constant
    for k in range(3):
        assert abs(np.trace(rhs @ np.linalg.matrix_power(mm, k))) < 1e-9 * gamma ** (k + 2)


def test_rhs_vanishes_at_zero_residual_and_on_eigenstates():
    m, ds = setup(d=4, m=2, gamma=2.0, seed=3)
    exact = TrainingSet(ds.states, predictions(m, ds.states))
    assert np.allclose(asym_rhs(m, exact), 0)
    w, v = np.linalg.eigh(m)
    eig_ds = TrainingSet(v[:, [0, -1]].T, [0.3, -0.7])
    assert np.allclose(asym_rhs(m, eig_ds), 0, atol=1e-12)


def test_prediction_rates_equal_kernel_times_residual():
    m, ds = setup(d=8, m=4, gamma=2.0, seed=4)
    r = ds.labels - predictions(m, ds.states)
    assert np.allclose(prediction_rates(m, ds), k_asym_trace(m, ds, 1.0) @ r)


def test_two_level_rate():
    for g in [1.0, 2.0, 4.0]:
        m, ds = scalar_instance(g)
        assert prediction_rates(m, ds)[0] == pytest.approx(2 * g * g)


# -- integration ----------------------------------------------------------------


def test_single_sample_matches_scalar_ode_oracle():
    g = 2.0
    m, ds = scalar_instance(g)
    traj = integrate_asym(m, ds, 3.0, log_every=10)
    sol = solve_ivp(lambda t, y: 2 * (g * g - y**2) * (1 - y), (0, 3.0), [0.0], t_eval=traj.times, rtol=1e-11, atol=1e-13)
    yhat = traj.predictions(ds)[:, 0]
    assert np.max(np.abs(yhat - sol.y[0])) < 1e-8


def test_single_sample_bound_and_rate_identity():
    g = 2.0
    m, ds = scalar_instance(g)
    traj = integrate_asym(m, ds, 3.0, log_every=10)
    bound = traj.losses[0] * np.exp(-2 * (g * g - 1) * traj.times)
    assert np.all(traj.losses <= bound * (1 + 1e-9))
    for s in traj.states:
        y = 1 - s.residuals[0]
        assert abs(prediction_rates(s.measurement, ds)[0] - 2 * (g * g - y * y) * (1 - y)) < 1e-10


def test_integration_conserves_spectrum_and_decreases_loss():
    m, ds = setup(d=16, m=4, gamma=1.0, seed=5)
    traj = integrate_asym(m, ds, 5.0, log_every=100)
    assert traj.max_spectrum_drift < 1e-6
    assert np.all(np.diff(traj.losses) <= 1e-14)
    assert traj.times[-1] == pytest.approx(5.0)


def test_integration_lands_on_t_end_and_accepts_state():
    m, ds = setup(seed=6)
    traj = integrate_asym(asym_state(m, ds, 1.0), ds, 0.0105, step=0.001)
    assert traj.times[0] == 1.0
    assert traj.times[-1] == pytest.approx(1.0105)
    assert len(traj) == 12
    assert integrate_asym(m, ds, 0.0).times.tolist() == [0.0]
    assert default_step(4.0) == pytest.approx(1e-3 / 16)


def test_step_halving_converges():
    m, ds = setup(d=8, m=2, gamma=2.0, seed=7)
    assert step_halving_error(m, ds, 0.5, 4 * default_step(2.0)) < 1e-6


def test_stationary_start_stays_put():
    m, ds = setup(d=4, m=2, gamma=2.0, seed=8)
    exact = TrainingSet(ds.states, predictions(m, ds.states))
    traj = integrate_asym(m, exact, 1.0, log_every=1000)
    assert np.allclose(traj.states[-1].measurement, m)


def test_integrator_errors():
    m, ds = setup(seed=9)
    with pytest.raises(ContractError):
        integrate_asym(m, ds, 1.0, step=0.0)
    with pytest.raises(ContractError):
        integrate_asym(m, ds, -1.0)
    with pytest.raises(DimensionError):
        integrate_asym(np.eye(4), ds, 1.0)


def test_huge_step_aborts():
    m, ds = setup(d=8, m=2, gamma=4.0, seed=10)
    with pytest.raises(NumericalAbort):
        integrate_asym(m, ds, 5.0, step=0.5)
    assert issubclass(SpectrumDriftError, NumericalAbort)


def test_kernel_tracking():
    m, ds = setup(d=8, m=2, gamma=2.0, seed=11)
    traj = integrate_asym(m, ds, 0.5, log_every=50)
    times, lam = track_lambda_min(traj, ds)
    assert times.shape == lam.shape == (len(traj),)
    assert lam[0] == pytest.approx(np.linalg.eigvalsh(k_asym_trace(m, ds))[0])
    change = relative_kernel_change(traj, ds)
    assert change[0] == 0 and change[-1] > 0


# -- global minima --------------------------------------------------------------


def test_structure_matrix_blocks_and_spectrum():
    for m in [2, 4, 8]:
        for g in [1.1, 2.0, 4.0]:
            r = structure_matrix(m, g)
            assert np.allclose(r, r.T)
            assert np.allclose(r[0, 0], (1 + 1 / g) / 2)
            assert np.allclose(r[-1, -1], (1 - 1 / g) / 2)
            expected = np.zeros(m)
            expected[-1] = m / 2
            assert np.allclose(np.linalg.eigvalsh(r), expected, atol=1e-12)


def test_minimum_weights():
    assert minimum_diagonal(2.0) == pytest.approx(6.0)
    assert np.allclose(positive_weights(2, 2.0), [0.75, 0.25])
    assert np.allclose(squared_overlap_weights(2, 2.0), [[0.5625, 0.1875], [0.1875, 0.0625]])


@pytest.mark.parametrize("d,m,g", [(16, 2, 2.0), (32, 4, 1.5), (64, 4, 4.0)])
def test_sampled_minimum_is_a_zero_loss_point(d, m, g):
    smp = sample_global_minimum(d, m, g, RngStream(d, 7))
    assert np.allclose(np.diag(smp.gram_g), 1)
    assert np.allclose(np.diag(smp.k_asym_at_min), minimum_diagonal(g), atol=1e-10)
    assert np.allclose(np.diag(smp.k_asym_block_form), minimum_diagonal(g), atol=1e-10)
    base, ds = smp.embed()
    assert np.allclose(ds.gram(), np.eye(m), atol=1e-10)
    assert np.allclose(g * predictions(base, ds.states), smp.labels, atol=1e-10)
    # the closed form equals the kernel evaluated at the explicit minimum
    assert np.allclose(k_asym_projection(base, ds, g), smp.k_asym_at_min, atol=1e-10)
    assert smp.lambda_g == pytest.approx(np.linalg.eigvalsh(smp.k_asym_at_min)[0])
    assert smp.lambda_g <= minimum_diagonal(g) + 1e-10


def test_two_sample_off_diagonal_forms():
    g = 2.0
    uhat = np.zeros((2, 4), dtype=complex)
    uhat[0, 0] = 1
    uhat[1] = [0.6, 0.8j, 0, 0]
    smp = global_minimum_from_directions(uhat, 8, g)
    ov = abs(uhat[0].conj() @ uhat[1]) ** 2
    assert smp.k_asym_at_min[0, 1] == pytest.approx(-8 * g * g * 0.75 * 0.25 * ov)
    assert smp.k_asym_block_form[0, 1] == pytest.approx(-8 * g * g * 0.5 * np.sqrt(1 - 1 / g**2) * ov)
    base, ds = smp.embed()
    assert np.allclose(k_asym_trace(base, ds, g), smp.k_asym_at_min)


def test_orthogonal_directions_reach_reference():
    uhat = np.eye(8, dtype=complex)[:4]
    smp = global_minimum_from_directions(uhat, 16, 2.0)
    assert smp.lambda_g == pytest.approx(minimum_diagonal(2.0))
    assert np.allclose(smp.k_asym_at_min, 6.0 * np.eye(4))


def test_minimum_argument_errors():
    with pytest.raises(DimensionError):
        sample_global_minimum(16, 3, 2.0, RngStream(0))
    with pytest.raises(DimensionError):
        sample_global_minimum(4, 4, 2.0, RngStream(0))
    with pytest.raises(ContractError):
        sample_global_minimum(16, 2, 1.0, RngStream(0))
    with pytest.raises(DimensionError):
        global_minimum_from_directions(np.eye(4, dtype=complex)[:2], 16, 2.0)
    with pytest.raises(ContractError):
        global_minimum_from_directions(2 * np.eye(8, dtype=complex)[:2], 16, 2.0)


def test_infeasible_directions_detected():
    # identical directions for two positive labels cannot both have overlap (1 + 1/g)/2
    uhat = np.zeros((2, 4), dtype=complex)
    uhat[:, 0] = 1
    assert not is_feasible(np.array([uhat[0], uhat[0], uhat[0], uhat[0]]), 1.1)
    assert is_feasible(np.eye(4, dtype=complex)[:2], 1.1)


def test_lambda_g_statistics_reproducible_and_concentrated():
    a = lambda_g_statistics(256, 4, 2.0, 30, RngStream(1, 9))
    b = lambda_g_statistics(256, 4, 2.0, 30, RngStream(1, 9))
    assert np.array_equal(a["samples"], b["samples"])
    assert a["min"] <= a["median"] <= a["max"] <= a["reference"] + 1e-10
    assert a["fraction_above"] >= 0.9
    with pytest.raises(ContractError):
        lambda_g_statistics(256, 4, 2.0, 0, RngStream(0))


@pytest.mark.slow
def test_lambda_g_fraction_at_large_dimension():
    st_ = lambda_g_statistics(1024, 4, 2.0, 100, RngStream(2, 9), eps=0.1)
    assert st_["fraction_above"] >= 0.95


def test_hadamard_bound():
    gen = np.random.default_rng(0)
    for _ in range(30):
        a = gen.standard_normal((5, 5)) + 1j * gen.standard_normal((5, 5))
        b = gen.standard_normal((5, 5)) + 1j * gen.standard_normal((5, 5))
        assert hadamard_opnorm_bound_check(a + a.conj().T, b + b.conj().T)
    assert hadamard_opnorm_bound_check(np.eye(3), np.eye(3))
    j = np.ones((3, 3))
    assert hadamard_opnorm_bound_check(j, j)
    with pytest.raises(DimensionError):
        hadamard_opnorm_bound_check(np.eye(2), np.eye(3))
