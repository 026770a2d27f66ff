"""CSV/JSON output, rate estimation and curve statistics."""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np
from scipy import stats

STANDARD_COLUMNS = (
    "iter",
    "time",
    "loss",
    "rate_estimate",
    "lambda_min_asym",
    "lambda_max_full",
    "theta_disp_inf",
    "theta_disp_2",
)


def fmt(x: Any) -> str:
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    x = float(x)
    if np.isnan(x):
        return "nan"
    return repr(x)


def write_csv(path: Path, columns: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return path


def write_columns(path: Path, cols: dict[str, Sequence[Any]]) -> Path:
    names = list(cols)
    n = len(cols[names[0]])
    return write_csv(path, names, ([cols[k][i] for k in names] for i in range(n)))


def read_csv(path: Path) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    return {name: np.array([float(r[i]) for r in body]) for i, name in enumerate(header)}


def rate_estimate(times, losses, window: int = 50) -> np.ndarray:
    """``-d ln L / dt`` by centered differences spanning ``window`` logged points.

    Near the ends the span is truncated to the available points.
    """
    t = np.asarray(times, dtype=float)
    lnl = np.log(np.maximum(np.asarray(losses, dtype=float), 1e-300))
    n = t.size
    if n < 2:
        return np.full(n, np.nan)
    half = max(1, window // 2)
    idx = np.arange(n)
    lo = np.clip(idx - half, 0, n - 1)
    hi = np.clip(idx + half, 0, n - 1)
    return -(lnl[hi] - lnl[lo]) / (t[hi] - t[lo])


def interior_mask(n: int, window: int = 50) -> np.ndarray:
    """Points whose centered-difference span is not truncated."""
    half = max(1, window // 2)
    idx = np.arange(n)
    return (idx >= half) & (idx < n - half)


def flatness(rates, window: int = 50) -> float:
    """Mean rate over the last ``window`` points divided by the first ``window``."""
    r = np.asarray(rates, dtype=float)
    w = min(window, max(1, r.size // 2))
    first = np.mean(np.abs(r[:w]))
    last = np.mean(np.abs(r[-w:]))
    return float(last / first) if first > 0 else float("nan")


def linear_fit(x, y) -> dict[str, float]:
    res = stats.linregress(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    return {"slope": float(res.slope), "intercept": float(res.intercept), "r2": float(res.rvalue**2)}


def loglog_slope(x, y) -> float:
    return linear_fit(np.log(x), np.log(y))["slope"]


def aggregate_curves(curves: Sequence[np.ndarray]) -> dict[str, np.ndarray]:
    """Mean, std and half-std over seeds, truncated to the shortest curve."""
    n = min(len(c) for c in curves)
    arr = np.stack([np.asarray(c[:n], dtype=float) for c in curves])
    std = arr.std(axis=0)
    return {"mean": arr.mean(axis=0), "std": std, "half_std": 0.5 * std}


def jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if np.isfinite(x) else str(x)
    return obj


@dataclass
class RunRecord:
    """Machine-readable summary of one experiment run.

    ``created`` and ``wall_clock`` are the only non-deterministic fields.
    """

    kind: str
    config_hash: str
    config: dict[str, Any]
    tool_version: str
    seed_files: list[str] = field(default_factory=list)
    aggregate_files: list[str] = field(default_factory=list)
    plots: list[str] = field(default_factory=list)
    stats: dict[str, Any] = field(default_factory=dict)
    wall_clock: float = 0.0
    created: str = ""

    def write(self, path: Path) -> Path:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(jsonable(asdict(self)), indent=2, sort_keys=True) + "\n")
        return path

    @classmethod
    def read(cls, path: Path) -> "RunRecord":
        return cls(**json.loads(Path(path).read_text()))

