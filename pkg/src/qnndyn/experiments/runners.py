"""The seven experiment drivers.

Each kind has a simulate step that writes one CSV per (cell, seed) and a
summarize step that derives every reported statistic from those CSVs only,
so ``verify`` can recompute a run record from its files.
"""

from __future__ import annotations

import logging
import time as _time
import zlib
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable

import numpy as np

from ..asymdyn import (
    init_asym_measurement,
    integrate_asym,
    minimum_diagonal,
    sample_global_minimum,
)
from ..kernels import ResourceCapError, delta_matrix, eig_summary, k_asym_trace, kernel_snapshot, y_matrix, y_star
from ..linalg import RngStream, op_norm, swap_matrix
from ..model import (
    Measurement,
    build_periodic_ansatz,
    normalization_z,
    sample_orthogonal_dataset,
)
from ..train import GradientDescent, TrainConfig, sublinear_bound, sublinear_bound_constants, train_gd, train_lockstep
from . import svg
from .config import ExperimentConfig
from .records import (
    RunRecord,
    aggregate_curves,
    flatness,
    interior_mask,
    jsonable,
    linear_fit,
    loglog_slope,
    rate_estimate,
    read_csv,
    write_columns,
)

log = logging.getLogger(__name__)

TOOL_VERSION = "0.1.0"
Y_CONCENTRATION_MAX_D = 16
# streams: 1 dataset, 2 ansatz unitaries, 3 asymptotic initial measurement
DATA_STREAM, ANSATZ_STREAM, ASYM_STREAM = 1, 2, 3


# -- shared builders ----------------------------------------------------------


def _dataset(d: int, m: int, seed: int, label_mode: str):
    return sample_orthogonal_dataset(d, m, RngStream(seed, DATA_STREAM), balanced=label_mode == "balanced")


def _ansatz(d: int, p: int, seed: int):
    return build_periodic_ansatz(d, p, RngStream(seed, ANSATZ_STREAM))


def _gtag(g: float) -> str:
    return f"{g:g}"


def train_tag(d: int, p: int, g: float) -> str:
    return f"d{d}_p{p}_g{_gtag(g)}"


def asym_tag(d: int, m: int, g: float) -> str:
    return f"d{d}_m{m}_g{_gtag(g)}"


def seed_file(tag: str, seed: int) -> str:
    return f"seeds/{tag}_seed{seed}.csv"


def _t_end(cfg: ExperimentConfig, g: float) -> float:
    return cfg.t_end / g**2 if cfg.t_end_gamma_scaled else cfg.t_end


def _nan(n: int) -> np.ndarray:
    return np.full(n, np.nan)


# -- finite-p training --------------------------------------------------------


def _kernel_probe(ansatz, dataset, meas, with_full: bool = True) -> Callable:
    pz = ansatz.num_params * normalization_z(ansatz.generator)

    def probe(theta, iteration):
        snap = kernel_snapshot(ansatz, theta, dataset, meas)
        lam_min = eig_summary(snap.k_asym)[0]
        lam_max = eig_summary(snap.k_full / pz)[1] if with_full else np.nan
        return lam_min, lam_max, snap.k_asym

    return probe


def _training_columns(traj, cfg: ExperimentConfig, p: int, z: float, m: int) -> dict[str, Any]:
    iters = np.asarray(traj.iterations)
    t = iters * traj.learning_rate * p * z / m
    losses = traj.loss_array
    if traj.snapshots:
        lam_min = np.array([s[0] for s in traj.snapshots])
        lam_max = np.array([s[1] for s in traj.snapshots])
    else:
        lam_min = lam_max = _nan(iters.size)
    return {
        "iter": iters,
        "time": t,
        "loss": losses,
        "rate_estimate": rate_estimate(t, losses, cfg.rate_window),
        "lambda_min_asym": lam_min,
        "lambda_max_full": lam_max,
        "theta_disp_inf": np.asarray(traj.theta_disp_inf),
        "theta_disp_2": np.asarray(traj.theta_disp_2),
    }


def _train_one(cfg: ExperimentConfig, d: int, m: int, p: int, g: float, seed: int, iterations: int | None = None):
    ds = _dataset(d, m, seed, cfg.label_mode)
    ans = _ansatz(d, p, seed)
    meas = Measurement.pauli_like(d, g)
    tc = TrainConfig(cfg.lr_scale / p, iterations or cfg.iterations, cfg.early_stop_loss, cfg.log_every)
    probe = _kernel_probe(ans, ds, meas) if cfg.kernels else None
    return ans, ds, meas, train_gd(ans, ds, meas, tc, probe)


def _write_training(out: Path, rel: str, cfg, ans, traj, m: int, g: float, extra: dict | None = None) -> str:
    p = ans.num_params
    z = normalization_z(ans.generator)
    cols = _training_columns(traj, cfg, p, z, m)
    if g == 1.0:
        c0, c1 = sublinear_bound_constants(ans, traj.learning_rate, traj.losses[0])
        cols["bound"] = sublinear_bound(c0, c1, cols["iter"])
    if extra:
        cols.update(extra)
    write_columns(out / rel, cols)
    return rel


def _job_pauli(cfg_dict, cell, seed, out):
    cfg = ExperimentConfig.from_dict(cfg_dict)
    d, p, g = cell
    m = cfg.m[0]
    ans, _, _, traj = _train_one(cfg, d, m, p, g, seed)
    return [_write_training(Path(out), seed_file(train_tag(d, p, g), seed), cfg, ans, traj, m, g)]


def _job_one_sample(cfg_dict, cell, seed, out):
    cfg = ExperimentConfig.from_dict(cfg_dict)
    d, p, g = cell
    ans, _, _, traj = _train_one(cfg, d, 1, p, g, seed)
    yhat = np.array([pr[0] for pr in traj.predictions])
    extra = {"yhat": yhat, "predicted_rate": 2 * (g * g - yhat**2)}
    return [_write_training(Path(out), seed_file(train_tag(d, p, g), seed), cfg, ans, traj, 1, g, extra)]


def _job_scaled(cfg_dict, cell, seeds, out):
    """Lockstep training of all seeds of one cell (early stop on the seed-mean loss)."""
    cfg = ExperimentConfig.from_dict(cfg_dict)
    d, p, g = cell
    m = cfg.m[0]
    runs = []
    for s in seeds:
        ds = _dataset(d, m, s, cfg.label_mode)
        ans = _ansatz(d, p, s)
        meas = Measurement.pauli_like(d, g)
        tc = TrainConfig(cfg.lr_scale / p, cfg.iterations, 0.0, cfg.log_every)
        probe = _kernel_probe(ans, ds, meas) if cfg.kernels else None
        runs.append(GradientDescent(ans, ds, meas, tc, probe))
    stop = cfg.early_stop_loss if g != 1.0 else 0.0
    trajs = train_lockstep(runs, stop, cfg.iterations)
    tag = train_tag(d, p, g)
    return [
        _write_training(Path(out), seed_file(tag, s), cfg, r.ansatz, tr, m, g) for s, r, tr in zip(seeds, runs, trajs)
    ]


# -- asymptotic dynamics ------------------------------------------------------


def _asym_run(cfg: ExperimentConfig, d: int, m: int, g: float, seed: int):
    ds = _dataset(d, m, seed, cfg.label_mode)
    m0 = init_asym_measurement(d, g, RngStream(seed, ASYM_STREAM))
    step = cfg.integrator_step / g**2 if cfg.integrator_step else None
    traj = integrate_asym(m0, ds, _t_end(cfg, g), step=step, log_every=cfg.log_every, check_every=10)
    ks = [k_asym_trace(s.measurement, ds, 1.0) for s in traj.states]
    return ds, traj, ks


def _asym_columns(cfg, traj, ks) -> dict[str, Any]:
    n = len(traj)
    t = traj.times
    losses = traj.losses
    eig = np.array([eig_summary(k)[:2] for k in ks])
    step_idx = np.rint((t - t[0]) / traj.step).astype(int)
    return {
        "iter": step_idx,
        "time": t,
        "loss": losses,
        "rate_estimate": rate_estimate(t, losses, cfg.rate_window),
        "lambda_min_asym": eig[:, 0],
        # no finite-p kernel in the limit; report the largest eigenvalue of K_asym
        "lambda_max_full": eig[:, 1],
        "theta_disp_inf": _nan(n),
        "theta_disp_2": _nan(n),
    }


def _job_lambda_sweep(cfg_dict, cell, seed, out):
    cfg = ExperimentConfig.from_dict(cfg_dict)
    d, m, g = cell
    ds, traj, ks = _asym_run(cfg, d, m, g, seed)
    cols = _asym_columns(cfg, traj, ks)
    cols["lambda_min_over_gamma2"] = cols["lambda_min_asym"] / g**2
    if m == 1:
        yhat = traj.predictions(ds)[:, 0]
        cols["yhat"] = yhat
        cols["k_scalar"] = 2 * (g * g - yhat**2)
    rel = seed_file(asym_tag(d, m, g), seed)
    write_columns(Path(out) / rel, cols)
    return [rel]


def _write_matrix(path: Path, k: np.ndarray) -> None:
    idx = np.indices(k.shape).reshape(2, -1)
    write_columns(path, {"i": idx[0], "j": idx[1], "value": k.ravel()})


def _job_kernel_drift(cfg_dict, cell, seed, out):
    cfg = ExperimentConfig.from_dict(cfg_dict)
    d, m, g = cell
    out = Path(out)
    ds, traj, ks = _asym_run(cfg, d, m, g, seed)
    cols = _asym_columns(cfg, traj, ks)
    k0 = ks[0]
    cols["kernel_rel_change"] = np.array([np.linalg.norm(k - k0) / np.linalg.norm(k0) for k in ks])
    tag = asym_tag(d, m, g)
    rel = seed_file(tag, seed)
    write_columns(out / rel, cols)
    krel = f"k0/{tag}_seed{seed}.csv"
    _write_matrix(out / krel, k0 / g**2)
    files = [rel, krel]
    for p in cfg.finite_p:
        ans, _, _, tr = _train_one(cfg.replace(kernels=True), d, m, p, g, seed)
        k_traj = [s[2] for s in tr.snapshots]
        change = np.array([np.linalg.norm(k - k_traj[0]) / np.linalg.norm(k_traj[0]) for k in k_traj])
        frel = f"finite_p/{tag}_p{p}_seed{seed}.csv"
        _write_training(out, frel, cfg, ans, tr, m, g, {"kernel_rel_change": change})
        files.append(frel)
    return files


# -- concentration of Y and global minima --------------------------------------


def _job_y(cfg_dict, cell, seed, out):
    cfg = ExperimentConfig.from_dict(cfg_dict)
    (d,) = cell
    out = Path(out)
    cap = max(cfg.d2_cap, d * d)
    rows = {"p": [], "delta_op": []}
    for p in cfg.p:
        ans = _ansatz(d, p, seed)
        rows["p"].append(p)
        rows["delta_op"].append(op_norm(delta_matrix(ans, np.zeros(p), cap)))
    init_rel = f"seeds/init_d{d}_seed{seed}.csv"
    write_columns(out / init_rel, rows)
    files = [init_rel]
    if cfg.p_train:
        m = cfg.m[0]
        tr_rows = {"p": [], "theta_disp_inf": [], "theta_disp_2": [], "y_change_op": [], "final_loss": []}
        for p in cfg.p_train:
            ds = _dataset(d, m, seed, cfg.label_mode)
            ans = _ansatz(d, p, seed)
            meas = Measurement.pauli_like(d, cfg.gamma[0])
            tc = TrainConfig(cfg.lr_scale / p, cfg.iterations, 0.0, cfg.iterations)
            traj = train_gd(ans, ds, meas, tc)
            dy = y_matrix(ans, traj.theta_final, cap) - y_matrix(ans, traj.theta0, cap)
            tr_rows["p"].append(p)
            tr_rows["theta_disp_inf"].append(traj.theta_disp_inf[-1])
            tr_rows["theta_disp_2"].append(traj.theta_disp_2[-1])
            tr_rows["y_change_op"].append(op_norm(0.5 * (dy + dy.conj().T)))
            tr_rows["final_loss"].append(traj.losses[-1])
        train_rel = f"seeds/train_d{d}_seed{seed}.csv"
        write_columns(out / train_rel, tr_rows)
        files.append(train_rel)
    return files


def minima_stream(seed: int, d: int, m: int, g: float) -> RngStream:
    return RngStream(seed, 1000 + zlib.crc32(f"{d},{m},{g!r}".encode()))


def _job_minima(cfg_dict, cell, seed, out):
    cfg = ExperimentConfig.from_dict(cfg_dict)
    d, m, g = cell
    gen = minima_stream(seed, d, m, g).generator()
    ref = minimum_diagonal(g)
    target = np.zeros(m)
    target[-1] = m / 2
    cols = {"sample": [], "lambda_g": [], "lambda_g_block": [], "diag_dev": [], "r_eig_dev": []}
    for i in range(cfg.num_samples):
        smp = sample_global_minimum(d, m, g, gen)
        cols["sample"].append(i)
        cols["lambda_g"].append(smp.lambda_g)
        cols["lambda_g_block"].append(smp.lambda_g_block)
        cols["diag_dev"].append(float(np.max(np.abs(np.diag(smp.k_asym_at_min) - ref))))
        cols["r_eig_dev"].append(float(np.max(np.abs(np.linalg.eigvalsh(smp.structure_r) - target))))
    rel = seed_file(asym_tag(d, m, g), seed)
    write_columns(Path(out) / rel, cols)
    return [rel]


# -- job planning -------------------------------------------------------------


def _training_cells(cfg: ExperimentConfig) -> list[tuple]:
    return [(d, p, g) for d in cfg.d for p in cfg.p for g in cfg.gamma]


def _asym_cells(cfg: ExperimentConfig) -> list[tuple]:
    return [(d, m, g) for d in cfg.d for m in cfg.m for g in cfg.gamma]


def _scaled_cells(cfg: ExperimentConfig) -> list[tuple]:
    gammas = list(cfg.gamma)
    if cfg.control_gamma is not None and cfg.control_gamma not in gammas:
        gammas.append(cfg.control_gamma)
    return [(d, p, g) for d in cfg.d for p in cfg.p for g in gammas]


def plan_jobs(cfg: ExperimentConfig) -> list[tuple[Callable, tuple, Any]]:
    k = cfg.kind
    if k == "pauli-sublinear":
        return [(_job_pauli, c, s) for c in _training_cells(cfg) for s in cfg.seeds]
    if k == "one-sample":
        return [(_job_one_sample, c, s) for c in _training_cells(cfg) for s in cfg.seeds]
    if k == "scaled-fast":
        return [(_job_scaled, c, tuple(cfg.seeds)) for c in _scaled_cells(cfg)]
    if k == "asym-lambda-sweep":
        return [(_job_lambda_sweep, c, s) for c in _asym_cells(cfg) for s in cfg.seeds]
    if k == "kernel-drift":
        return [(_job_kernel_drift, c, s) for c in _asym_cells(cfg) for s in cfg.seeds]
    if k == "y-concentration":
        return [(_job_y, (d,), s) for d in cfg.d for s in cfg.seeds]
    if k == "minima-sampling":
        return [(_job_minima, c, s) for c in _asym_cells(cfg) for s in cfg.seeds]
    raise ValueError(k)


def check_resources(cfg: ExperimentConfig, allow_large: bool = False) -> None:
    if allow_large:
        return
    if cfg.kind == "y-concentration":
        if max(cfg.d) > Y_CONCENTRATION_MAX_D or max(cfg.d) ** 2 > cfg.d2_cap:
            raise ResourceCapError(
                f"y-concentration builds d^2 x d^2 operators; d = {max(cfg.d)} exceeds {Y_CONCENTRATION_MAX_D} "
                "(pass --allow-large to override)"
            )
        return
    if cfg.kind != "minima-sampling" and max(cfg.d) > cfg.max_d:
        raise ResourceCapError(f"d = {max(cfg.d)} exceeds the desk-scale limit {cfg.max_d} (pass --allow-large)")


def _run_job(job):
    fn, cfg_dict, cell, seed, out = job
    return fn(cfg_dict, cell, seed, out)


def simulate(cfg: ExperimentConfig, out: Path, threads: int = 1) -> list[str]:
    jobs = [(fn, cfg.to_dict(), cell, seed, str(out)) for fn, cell, seed in plan_jobs(cfg)]
    if threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_run_job, jobs))
    else:
        results = [_run_job(j) for j in jobs]
    return [f for r in results for f in r]


# -- summaries (CSV in, statistics out) ---------------------------------------


def _seed_curves(out: Path, tag: str, seeds) -> list[dict[str, np.ndarray]]:
    return [read_csv(out / seed_file(tag, s)) for s in seeds]


def _training_summary(cfg, out, cells, write, plots, aggregates):
    stats: dict[str, Any] = {}
    by_d: dict[int, list] = {}
    for d, p, g in cells:
        tag = train_tag(d, p, g)
        curves = _seed_curves(out, tag, cfg.seeds)
        finals = np.array([c["loss"][-1] for c in curves])
        agg = aggregate_curves([c["loss"] for c in curves])
        n = agg["mean"].size
        iters = curves[0]["iter"][:n]
        times = curves[0]["time"][:n]
        mean_rate = rate_estimate(times, agg["mean"], cfg.rate_window)
        cell = {
            "d": d,
            "p": p,
            "gamma": g,
            "final_loss": finals,
            "mean_final_loss": float(finals.mean()),
            "final_iteration": [int(c["iter"][-1]) for c in curves],
            "flatness": flatness(mean_rate, cfg.rate_window),
            "theta_disp_inf_final": [float(c["theta_disp_inf"][-1]) for c in curves],
        }
        if "bound" in curves[0]:
            ratios = np.concatenate([c["loss"] / c["bound"] for c in curves])
            cell["min_bound_ratio"] = float(ratios.min())
        reach = []
        for c in curves:
            hit = np.nonzero(c["loss"] < cfg.threshold_loss)[0]
            reach.append(int(c["iter"][hit[0]]) if hit.size else -1)
        cell["iters_to_threshold"] = reach
        cell["seeds_within_fast_iterations"] = int(sum(0 <= r <= cfg.fast_iterations for r in reach))
        stats[tag] = cell
        by_d.setdefault(d, []).append((f"p={p} g={g:g}", iters, agg["mean"]))
        if write:
            cols = {
                "iter": iters,
                "time": times,
                "mean_loss": agg["mean"],
                "std_loss": agg["std"],
                "half_std_loss": agg["half_std"],
                "rate_mean_curve": mean_rate,
            }
            if "bound" in curves[0]:
                cols["mean_bound"] = aggregate_curves([c["bound"] for c in curves])["mean"]
            rel = f"aggregate/{tag}.csv"
            write_columns(out / rel, cols)
            aggregates.append(rel)
    if write:
        for d, series in by_d.items():
            rel = f"plots/loss_d{d}.svg"
            svg.line_plot(out / rel, series, f"mean training loss, d={d}", "iteration", "L", logy=True)
            plots.append(rel)
    return stats


def summarize_pauli(cfg, out, write, plots, aggregates):
    stats = _training_summary(cfg, out, _training_cells(cfg), write, plots, aggregates)
    ratios = [c["min_bound_ratio"] for c in stats.values()]
    stats["min_bound_ratio"] = float(min(ratios))
    return stats


def summarize_scaled(cfg, out, write, plots, aggregates):
    return _training_summary(cfg, out, _scaled_cells(cfg), write, plots, aggregates)


def summarize_one_sample(cfg, out, write, plots, aggregates):
    xs, ys, series = [], [], []
    per_gamma = {}
    for d, p, g in _training_cells(cfg):
        tag = train_tag(d, p, g)
        gx, gy = [], []
        for c in _seed_curves(out, tag, cfg.seeds):
            ok = interior_mask(c["loss"].size, cfg.rate_window) & np.isfinite(c["rate_estimate"])
            gx.append(c["predicted_rate"][ok])
            gy.append(c["rate_estimate"][ok])
        gx = np.concatenate(gx)
        gy = np.concatenate(gy)
        per_gamma[_gtag(g)] = {"min_rate": float(gy.min()) if gy.size else float("nan"), "points": int(gx.size)}
        xs.append(gx)
        ys.append(gy)
        series.append((f"g={g:g}", gx / g**2, gy / g**2))
    x = np.concatenate(xs)
    y = np.concatenate(ys)
    scaled_x = np.concatenate([s[1] for s in series])
    scaled_y = np.concatenate([s[2] for s in series])
    mins = [per_gamma[_gtag(g)]["min_rate"] for g in sorted(cfg.gamma)]
    stats = {
        "fit": linear_fit(x, y),
        "fit_scaled": linear_fit(scaled_x, scaled_y),
        "per_gamma": per_gamma,
        "min_rate_increasing": bool(np.all(np.diff(mins) > 0)),
    }
    if write:
        rel = "plots/rate_scatter.svg"
        svg.scatter_plot(out / rel, series, "rate vs predicted (scaled by 1/gamma^2)", "2(g^2-yhat^2)/g^2", "-dlnL/dt / g^2")
        plots.append(rel)
    return stats


def summarize_lambda_sweep(cfg, out, write, plots, aggregates):
    stats: dict[str, Any] = {}
    series = []
    for d, m, g in _asym_cells(cfg):
        tag = asym_tag(d, m, g)
        curves = _seed_curves(out, tag, cfg.seeds)
        mins = np.array([c["lambda_min_asym"].min() for c in curves])
        cell = {
            "d": d,
            "m": m,
            "gamma": g,
            "m_over_d": m / d,
            "min_lambda_mean": float(mins.mean()),
            "min_lambda_over_gamma2_mean": float(mins.mean() / g**2),
            "global_min_lambda": float(min(c["lambda_min_asym"].min() for c in curves)),
        }
        if m == 1:
            cell["scalar_dev"] = float(max(np.max(np.abs(c["lambda_min_asym"] - c["k_scalar"])) for c in curves))
        stats[tag] = cell
        agg = aggregate_curves([c["lambda_min_over_gamma2"] for c in curves])
        t = curves[0]["time"][: agg["mean"].size]
        series.append((f"d={d} m={m} g={g:g}", t * g**2, agg["mean"]))
        if write:
            rel = f"aggregate/{tag}.csv"
            write_columns(out / rel, {"time": t, "mean_lambda_min_over_gamma2": agg["mean"], "std": agg["std"]})
            aggregates.append(rel)
    ratios = {}
    for d in cfg.d:
        for m in cfg.m:
            gs = sorted(cfg.gamma)
            for g1, g2 in zip(gs, gs[1:]):
                a = stats[asym_tag(d, m, g1)]["min_lambda_mean"]
                b = stats[asym_tag(d, m, g2)]["min_lambda_mean"]
                ratios[f"d{d}_m{m}_g{_gtag(g1)}_to_{_gtag(g2)}"] = {"ratio": b / a, "gamma2_ratio": (g2 / g1) ** 2}
    stats["gamma_ratios"] = ratios
    if write:
        rel = "plots/lambda_min.svg"
        svg.line_plot(out / rel, series, "lambda_min(K_asym)/gamma^2", "gamma^2 t", "lambda_min/gamma^2")
        plots.append(rel)
    return stats


def _read_matrix(path: Path) -> np.ndarray:
    c = read_csv(path)
    n = int(c["i"].max()) + 1
    k = np.zeros((n, n))
    k[c["i"].astype(int), c["j"].astype(int)] = c["value"]
    return k


def summarize_kernel_drift(cfg, out, write, plots, aggregates):
    stats: dict[str, Any] = {}
    series = []
    for d, m, g in _asym_cells(cfg):
        tag = asym_tag(d, m, g)
        curves = _seed_curves(out, tag, cfg.seeds)
        agg = aggregate_curves([c["kernel_rel_change"] for c in curves])
        per_seed = [float(c["kernel_rel_change"].max()) for c in curves]
        cell = {
            "d": d,
            "m": m,
            "gamma": g,
            "max_mean_rel_change": float(agg["mean"].max()),
            "per_seed_max_rel_change": per_seed,
            "final_mean_loss": float(np.mean([c["loss"][-1] for c in curves])),
        }
        for p in cfg.finite_p:
            fc = [read_csv(out / f"finite_p/{tag}_p{p}_seed{s}.csv") for s in cfg.seeds]
            cell[f"finite_p{p}_max_mean_rel_change"] = float(aggregate_curves([c["kernel_rel_change"] for c in fc])["mean"].max())
        stats[tag] = cell
        t = curves[0]["time"][: agg["mean"].size]
        series.append((f"d={d} m={m} g={g:g}", t, agg["mean"]))
        if write:
            rel = f"aggregate/{tag}.csv"
            write_columns(out / rel, {"time": t, "mean_rel_change": agg["mean"], "std": agg["std"], "half_std": agg["half_std"]})
            aggregates.append(rel)
    gdev = 0.0
    for d in cfg.d:
        for m in cfg.m:
            for s in cfg.seeds:
                ks = [_read_matrix(out / f"k0/{asym_tag(d, m, g)}_seed{s}.csv") for g in cfg.gamma]
                for k in ks[1:]:
                    gdev = max(gdev, float(np.max(np.abs(k - ks[0]))))
    stats["k0_gamma_independence_dev"] = gdev
    stats["min_cell_change"] = float(min(v["max_mean_rel_change"] for k, v in stats.items() if isinstance(v, dict)))
    if write:
        rel = "plots/kernel_drift.svg"
        svg.line_plot(out / rel, series, "relative change of K_asym(t)", "t", "||K(t)-K(0)||_F/||K(0)||_F")
        plots.append(rel)
    return stats


def y_star_consistency(d: int, trials: int = 5, seed: int = 0) -> float:
    """Compare ``tr((A (x) B) Y*)`` with ``tr(AB) - tr(A) tr(B) / d`` on random Hermitian pairs."""
    ys = y_star(d, cap=max(4096, d * d))
    gen = np.random.default_rng(seed)
    dev = 0.0
    for _ in range(trials):
        a = gen.standard_normal((d, d)) + 1j * gen.standard_normal((d, d))
        b = gen.standard_normal((d, d)) + 1j * gen.standard_normal((d, d))
        a, b = a + a.conj().T, b + b.conj().T
        lhs = np.trace(np.kron(a, b) @ ys)
        rhs = np.trace(a @ b) - np.trace(a) * np.trace(b) / d
        dev = max(dev, abs(lhs - rhs))
    # the swap operator itself must square to the identity
    w = swap_matrix(d)
    dev = max(dev, float(np.max(np.abs(w @ w - np.eye(d * d)))))
    return float(dev)


def summarize_y(cfg, out, write, plots, aggregates):
    stats: dict[str, Any] = {}
    series = []
    for d in cfg.d:
        init = [read_csv(out / f"seeds/init_d{d}_seed{s}.csv") for s in cfg.seeds]
        ps = init[0]["p"]
        med = np.median(np.stack([c["delta_op"] for c in init]), axis=0)
        cell = {
            "p": ps,
            "median_delta_op": med,
            "init_slope": loglog_slope(ps, med) if ps.size > 1 else float("nan"),
            "y_star_consistency": y_star_consistency(d),
        }
        series.append((f"d={d} |Y(0)-Y*|", ps, med))
        if cfg.p_train:
            tr = [read_csv(out / f"seeds/train_d{d}_seed{s}.csv") for s in cfg.seeds]
            pt = tr[0]["p"]
            disp = np.median(np.stack([c["theta_disp_inf"] for c in tr]), axis=0)
            dy = np.median(np.stack([c["y_change_op"] for c in tr]), axis=0)
            cell.update(
                {
                    "p_train": pt,
                    "median_theta_disp_inf": disp,
                    "median_y_change_op": dy,
                    "theta_disp_slope": loglog_slope(pt, disp) if pt.size > 1 else float("nan"),
                    "y_change_slope": loglog_slope(pt, dy) if pt.size > 1 else float("nan"),
                }
            )
            series.append((f"d={d} |theta(T)-theta(0)|_inf", pt, disp))
        stats[f"d{d}"] = cell
        if write:
            rel = f"aggregate/y_init_d{d}.csv"
            write_columns(out / rel, {"p": ps, "median_delta_op": med})
            aggregates.append(rel)
    if write:
        rel = "plots/y_concentration.svg"
        logged = [(lab, np.log10(x), y) for lab, x, y in series]
        svg.line_plot(out / rel, logged, "concentration vs p", "log10 p", "median", logy=True)
        plots.append(rel)
    return stats


def summarize_minima(cfg, out, write, plots, aggregates):
    stats: dict[str, Any] = {}
    for d, m, g in _asym_cells(cfg):
        tag = asym_tag(d, m, g)
        rows = _seed_curves(out, tag, cfg.seeds)
        lam = np.concatenate([r["lambda_g"] for r in rows])
        lam_b = np.concatenate([r["lambda_g_block"] for r in rows])
        ref = minimum_diagonal(g)
        q = np.quantile(lam, [0.0, 0.05, 0.25, 0.5, 0.75, 0.95, 1.0])
        stats[tag] = {
            "d": d,
            "m": m,
            "gamma": g,
            "reference": ref,
            "quantiles": dict(zip(("min", "q05", "q25", "median", "q75", "q95", "max"), q)),
            "median": float(q[3]),
            "median_block": float(np.median(lam_b)),
            "fraction_above": float(np.mean(lam >= ref * (1 - cfg.eps))),
            "max_above_reference": float(np.max(lam - ref)),
            "diag_dev": float(max(r["diag_dev"].max() for r in rows)),
            "r_eig_dev": float(max(r["r_eig_dev"].max() for r in rows)),
            "samples": int(lam.size),
        }
    trends = {}
    for m in cfg.m:
        for g in cfg.gamma:
            meds = [stats[asym_tag(d, m, g)]["median"] for d in sorted(cfg.d)]
            trends[f"m{m}_g{_gtag(g)}"] = bool(np.all(np.diff(meds) >= 0))
    stats["median_nondecreasing_in_d"] = trends
    if write:
        rel = "aggregate/lambda_g.csv"
        cells = [v for v in stats.values() if isinstance(v, dict) and "quantiles" in v]
        write_columns(
            out / rel,
            {
                "d": [c["d"] for c in cells],
                "m": [c["m"] for c in cells],
                "gamma": [c["gamma"] for c in cells],
                "median": [c["median"] for c in cells],
                "q05": [c["quantiles"]["q05"] for c in cells],
                "q95": [c["quantiles"]["q95"] for c in cells],
                "fraction_above": [c["fraction_above"] for c in cells],
            },
        )
        aggregates.append(rel)
    return stats


SUMMARIES = {
    "pauli-sublinear": summarize_pauli,
    "one-sample": summarize_one_sample,
    "asym-lambda-sweep": summarize_lambda_sweep,
    "scaled-fast": summarize_scaled,
    "kernel-drift": summarize_kernel_drift,
    "y-concentration": summarize_y,
    "minima-sampling": summarize_minima,
}


def summarize(cfg: ExperimentConfig, out: Path, write: bool = True) -> tuple[dict, list[str], list[str]]:
    plots: list[str] = []
    aggregates: list[str] = []
    stats = SUMMARIES[cfg.kind](cfg, Path(out), write, plots, aggregates)
    return jsonable(stats), aggregates, plots


def run_experiment(cfg: ExperimentConfig, out: Path | None = None, threads: int = 1, allow_large: bool = False) -> RunRecord:
    """Simulate, summarize and write ``run_record.json`` into the output directory."""
    out = Path(out or cfg.output_dir)
    check_resources(cfg, allow_large)
    out.mkdir(parents=True, exist_ok=True)
    t0 = _time.perf_counter()
    files = simulate(cfg, out, threads)
    stats, aggregates, plots = summarize(cfg, out, write=True)
    rec = RunRecord(
        kind=cfg.kind,
        config_hash=cfg.config_hash(),
        config=cfg.to_dict(),
        tool_version=TOOL_VERSION,
        seed_files=files,
        aggregate_files=aggregates,
        plots=plots,
        stats=stats,
        wall_clock=_time.perf_counter() - t0,
        created=datetime.now(timezone.utc).isoformat(timespec="seconds"),
    )
    rec.write(out / "run_record.json")
    log.info("%s finished in %.1f s -> %s", cfg.kind, rec.wall_clock, out)
    return rec


def _kind_runner(kind: str):
    def runner(cfg: ExperimentConfig, out=None, threads: int = 1, allow_large: bool = False) -> RunRecord:
        if cfg.kind != kind:
            cfg = cfg.replace(kind=kind)
        return run_experiment(cfg, out, threads, allow_large)

    runner.__name__ = "run_" + kind.replace("-", "_")
    runner.__doc__ = f"Run a ``{kind}`` experiment; see :func:`run_experiment`."
    return runner


run_pauli_sublinear = _kind_runner("pauli-sublinear")
run_one_sample = _kind_runner("one-sample")
run_asym_lambda_sweep = _kind_runner("asym-lambda-sweep")
run_scaled_fast = _kind_runner("scaled-fast")
run_kernel_drift = _kind_runner("kernel-drift")
run_y_concentration = _kind_runner("y-concentration")
run_minima_sampling = _kind_runner("minima-sampling")


def _close(a, b, rtol: float = 1e-9, atol: float = 1e-12) -> bool:
    if isinstance(a, dict) and isinstance(b, dict):
        return a.keys() == b.keys() and all(_close(a[k], b[k], rtol, atol) for k in a)
    if isinstance(a, list) and isinstance(b, list):
        return len(a) == len(b) and all(_close(x, y, rtol, atol) for x, y in zip(a, b))
    if isinstance(a, (int, float)) and isinstance(b, (int, float)) and not isinstance(a, bool):
        return bool(np.isclose(a, b, rtol=rtol, atol=atol))
    return a == b


def verify_run(out: Path) -> tuple[bool, list[str]]:
    """Recompute the statistics of a run from its CSVs and compare with its record."""
    out = Path(out)
    rec = RunRecord.read(out / "run_record.json")
    cfg = ExperimentConfig.from_dict(rec.config)
    problems = []
    if cfg.config_hash() != rec.config_hash:
        problems.append("config hash does not match the stored config")
    missing = [f for f in rec.seed_files if not (out / f).exists()]
    if missing:
        problems.append(f"missing seed files: {missing[:5]}")
        return False, problems
    stats, _, _ = summarize(cfg, out, write=False)
    for key in sorted(set(stats) | set(rec.stats)):
        if key not in stats or key not in rec.stats or not _close(stats[key], rec.stats[key]):
            problems.append(f"statistic {key!r} differs from its recomputation")
    return not problems, problems
