import numpy as np
import pytest

from qnndyn.linalg import ContractError, RngStream
from qnndyn.model import Measurement, build_periodic_ansatz, predictions, sample_orthogonal_dataset
from qnndyn.train import (
    GradientDescent,
    NumericalAbort,
    TrainConfig,
    forward,
    generator_norm_sum,
    grad,
    kernel_time,
    loss,
    residuals,
    sublinear_bound,
    sublinear_bound_constants,
    train_gd,
    train_lockstep,
)


def instance(d=4, p=3, m=2, gamma=1.0, seed=0):
    rs = RngStream(seed)
    ans = build_periodic_ansatz(d, p, rs.child(1))
    ds = sample_orthogonal_dataset(d, m, rs.child(2))
    return ans, ds, Measurement.pauli_like(d, gamma)


def shift_rule_gradient(ans, theta, ds, meas):
    """Parameter-shift oracle: the generator has eigenvalues +/-a, so each prediction is a sinusoid of period pi/a."""
    a = np.abs(np.real(ans.generator[0, 0]))
    s = np.pi / (4 * a)
    yhat = forward(ans, theta, ds, meas).predictions
    g = np.zeros(theta.size)
    for l in range(theta.size):
        e = np.zeros(theta.size)
        e[l] = s
        dy = a * (forward(ans, theta + e, ds, meas).predictions - forward(ans, theta - e, ds, meas).predictions)
        g[l] = np.mean((yhat - ds.labels) * dy)
    return g


def test_loss_matches_definition():
    ans, ds, meas = instance(gamma=1.5)
    theta = np.array([0.1, 0.2, -0.3])
    u = ans.unitary(theta)
    yhat = predictions(u.conj().T @ meas.base @ u, ds.states, 1.5)
    assert np.isclose(loss(ans, theta, ds, meas), np.sum((yhat - ds.labels) ** 2) / (2 * ds.size))
    assert np.allclose(residuals(ans, theta, ds, meas), ds.labels - yhat)


@pytest.mark.parametrize("seed", range(5))
def test_gradient_matches_parameter_shift(seed):
    ans, ds, meas = instance(d=8, p=5, m=3, gamma=2.0, seed=seed)
    theta = np.random.default_rng(seed).uniform(-np.pi, np.pi, 5)
    assert np.allclose(grad(ans, theta, ds, meas), shift_rule_gradient(ans, theta, ds, meas), atol=1e-11)


def test_gradient_matches_central_differences():
    ans, ds, meas = instance(d=4, p=4, m=2, gamma=1.3, seed=3)
    theta = np.random.default_rng(1).uniform(-1, 1, 4)
    fd = np.array([(loss(ans, theta + h, ds, meas) - loss(ans, theta - h, ds, meas)) / 2e-5 for h in 1e-5 * np.eye(4)])
    g = grad(ans, theta, ds, meas)
    assert np.linalg.norm(g - fd) / np.linalg.norm(fd) < 1e-6


def test_train_config_validation():
    with pytest.raises(ContractError):
        TrainConfig(0.0)
    with pytest.raises(ContractError):
        TrainConfig(1e-3, max_iters=0)
    with pytest.raises(ContractError):
        TrainConfig(1e-3, early_stop_loss=-1)
    with pytest.raises(ContractError):
        TrainConfig(1e-3, log_every=0)
    assert TrainConfig.reference_default(80).learning_rate == pytest.approx(1e-3 / 80)


def test_gradient_descent_decreases_loss_and_logs():
    ans, ds, meas = instance(d=8, p=6, m=2, gamma=1.0, seed=1)
    traj = train_gd(ans, ds, meas, TrainConfig(0.01, max_iters=200, log_every=10))
    assert traj.iterations == list(range(0, 201, 10))
    assert np.all(np.diff(traj.loss_array) <= 1e-12)
    assert not traj.monotone_violations
    assert traj.stop_reason == "max_iters"
    assert np.allclose(traj.time, np.array(traj.iterations) * 0.01)
    assert traj.theta_disp_inf[0] == 0.0
    assert np.isclose(traj.theta_disp_2[-1], np.linalg.norm(traj.theta_final))


def test_sublinear_bound_on_short_run():
    ans, ds, meas = instance(d=8, p=10, m=4, gamma=1.0, seed=2)
    eta = 1e-3 / 10
    traj = train_gd(ans, ds, meas, TrainConfig(eta, max_iters=500))
    c0, c1 = sublinear_bound_constants(ans, eta, traj.losses[0])
    assert np.isclose(c1, 12 * eta * generator_norm_sum(ans))
    ratio = traj.loss_array / sublinear_bound(c0, c1, traj.iterations)
    assert ratio.min() >= 1 - 1e-9
    with pytest.raises(ContractError):
        sublinear_bound_constants(ans, eta, 0.0)


def test_early_stop_and_snapshot():
    ans, ds, meas = instance(d=4, p=8, m=1, gamma=3.0, seed=0)
    seen = []
    traj = train_gd(ans, ds, meas, TrainConfig(0.02, max_iters=5000, early_stop_loss=1e-4), lambda th, it: seen.append(it) or it)
    assert traj.stop_reason == "early_stop"
    assert traj.losses[-1] < 1e-4
    assert traj.snapshots == seen == traj.iterations


def test_lockstep_stops_on_mean():
    runs = []
    for s in range(3):
        ans, ds, meas = instance(d=4, p=8, m=2, gamma=3.0, seed=s)
        runs.append(GradientDescent(ans, ds, meas, TrainConfig(0.02, max_iters=4000)))
    trajs = train_lockstep(runs, mean_stop_loss=1e-3)
    assert {t.stop_reason for t in trajs} == {"mean_early_stop"}
    assert len({t.iterations[-1] for t in trajs}) == 1
    assert np.mean([t.losses[-1] for t in trajs]) < 1e-3
    assert train_lockstep([]) == []


def test_nan_parameters_abort():
    ans, ds, meas = instance()
    gd = GradientDescent(ans, ds, meas, TrainConfig(0.01, max_iters=5), theta0=np.full(3, np.nan))
    with pytest.raises(NumericalAbort):
        gd.step()


def test_spectrum_conserved_along_training():
    ans, ds, meas = instance(d=8, p=5, m=2, seed=4)
    m0 = np.linalg.eigvalsh(meas.base)

    def spectrum(theta, it):
        return np.max(np.abs(np.linalg.eigvalsh(forward(ans, theta, ds, meas).m_theta) - m0))

    traj = train_gd(ans, ds, meas, TrainConfig(0.05, max_iters=100), spectrum)
    assert max(traj.snapshots) < 1e-12


def test_kernel_time_scaling():
    assert np.allclose(kernel_time([0, 10], 1e-3 / 80, 80, 1.0, 4), [0.0, 10 * 1e-3 / 4])
