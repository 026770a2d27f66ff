"""Experiment configuration: JSON schema, validation and canonical hashing."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields
from importlib import resources
from pathlib import Path
from typing import Any

KINDS = (
    "pauli-sublinear",
    "one-sample",
    "asym-lambda-sweep",
    "scaled-fast",
    "kernel-drift",
    "y-concentration",
    "minima-sampling",
)

# keys that describe where results go rather than what is computed
_NON_SEMANTIC = ("output_dir",)
_LIST_FIELDS = ("d", "m", "p", "gamma", "seeds", "p_train", "finite_p")


class ConfigError(ValueError):
    """Invalid or inconsistent experiment configuration."""


@dataclass
class ExperimentConfig:
    """One experiment. Grid parameters are lists; scalars in JSON are accepted and wrapped.

    Learning rates are ``lr_scale / p``. ``t_end`` and ``integrator_step``
    drive the asymptotic integrator; the actual step is
    ``integrator_step / gamma^2`` (``None`` means ``1e-3 / gamma^2``) and with
    ``t_end_gamma_scaled`` the horizon is ``t_end / gamma^2`` as well.
    """

    kind: str
    d: list[int] = field(default_factory=lambda: [32])
    m: list[int] = field(default_factory=lambda: [4])
    p: list[int] = field(default_factory=lambda: [80])
    gamma: list[float] = field(default_factory=lambda: [1.0])
    seeds: list[int] = field(default_factory=lambda: list(range(10)))
    iterations: int = 10000
    lr_scale: float = 1e-3
    log_every: int = 10
    early_stop_loss: float = 0.0
    threshold_loss: float = 1e-2
    fast_iterations: int = 1000
    control_gamma: float | None = None
    kernels: bool = True
    label_mode: str = "balanced"
    t_end: float = 1.0
    t_end_gamma_scaled: bool = False
    integrator_step: float | None = None
    num_samples: int = 200
    eps: float = 0.1
    rate_window: int = 50
    p_train: list[int] = field(default_factory=list)
    finite_p: list[int] = field(default_factory=list)
    max_d: int = 128
    d2_cap: int = 4096
    output_dir: str = "runs"

    # -- construction ---------------------------------------------------------

    @classmethod
    def from_dict(cls, raw: dict[str, Any]) -> "ExperimentConfig":
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(raw) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        if "kind" not in raw:
            raise ConfigError("config is missing 'kind'")
        data = dict(raw)
        for key in _LIST_FIELDS:
            if key in data and not isinstance(data[key], list):
                data[key] = [data[key]]
        try:
            cfg = cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc
        cfg._coerce()
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentConfig":
        try:
            raw = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(raw)

    def _coerce(self) -> None:
        try:
            self.d = [int(x) for x in self.d]
            self.m = [int(x) for x in self.m]
            self.p = [int(x) for x in self.p]
            self.gamma = [float(x) for x in self.gamma]
            self.seeds = [int(x) for x in self.seeds]
            self.p_train = [int(x) for x in self.p_train]
            self.finite_p = [int(x) for x in self.finite_p]
            if self.control_gamma is not None:
                self.control_gamma = float(self.control_gamma)
            if self.integrator_step is not None:
                self.integrator_step = float(self.integrator_step)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad numeric value: {exc}") from exc

    # -- validation ----------------------------------------------------------

    def validate(self) -> None:
        if self.kind not in KINDS:
            raise ConfigError(f"unknown kind {self.kind!r}; expected one of {', '.join(KINDS)}")
        if not self.seeds:
            raise ConfigError("seeds must be non-empty")
        if len(set(self.seeds)) != len(self.seeds):
            raise ConfigError("seeds must be distinct")
        for name in ("d", "m", "p", "gamma"):
            if not getattr(self, name):
                raise ConfigError(f"{name} must be non-empty")
        if any(d < 2 or d % 2 for d in self.d):
            raise ConfigError(f"all dimensions must be even and >= 2, got {self.d}")
        if any(m < 1 for m in self.m) or any(p < 1 for p in self.p + self.p_train + self.finite_p):
            raise ConfigError("m and p values must be >= 1")
        if any(g <= 0 for g in self.gamma):
            raise ConfigError("gamma values must be positive")
        if self.iterations < 1 or self.log_every < 1 or self.rate_window < 2 or self.num_samples < 1:
            raise ConfigError("iterations, log_every, num_samples must be >= 1 and rate_window >= 2")
        if self.lr_scale <= 0 or self.t_end <= 0:
            raise ConfigError("lr_scale and t_end must be positive")
        if self.integrator_step is not None and self.integrator_step <= 0:
            raise ConfigError("integrator_step must be positive")
        if self.label_mode not in ("balanced", "iid"):
            raise ConfigError("label_mode must be 'balanced' or 'iid'")
        if not 0 < self.eps < 1:
            raise ConfigError("eps must lie in (0, 1)")
        if self.kind not in ("minima-sampling",) and any(m > d for m in self.m for d in self.d):
            raise ConfigError("m orthogonal states need m <= d")
        self._validate_kind()

    def _validate_kind(self) -> None:
        k = self.kind
        if k == "pauli-sublinear" and any(g != 1.0 for g in self.gamma):
            raise ConfigError("pauli-sublinear requires gamma = 1")
        if k == "one-sample" and self.m != [1]:
            raise ConfigError("one-sample requires m = 1")
        if k == "scaled-fast" and any(g <= 1.0 for g in self.gamma):
            raise ConfigError("scaled-fast requires gamma > 1")
        if k == "minima-sampling":
            if any(m % 2 or m < 2 for m in self.m):
                raise ConfigError("minima-sampling requires even m >= 2")
            if any(g <= 1.0 for g in self.gamma):
                raise ConfigError("minima-sampling requires gamma > 1")
            if any(m > d // 2 for m in self.m for d in self.d):
                raise ConfigError("minima-sampling requires m <= d/2")

    # -- identity -------------------------------------------------------------

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    def canonical_json(self) -> str:
        data = {k: v for k, v in self.to_dict().items() if k not in _NON_SEMANTIC}
        return json.dumps(data, sort_keys=True, separators=(",", ":"))

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()[:16]

    def replace(self, **changes) -> "ExperimentConfig":
        data = self.to_dict()
        data.update(changes)
        return ExperimentConfig.from_dict(data)


def default_config_path(kind: str) -> Path:
    if kind not in KINDS:
        raise ConfigError(f"unknown kind {kind!r}")
    return Path(str(resources.files("qnndyn.configs").joinpath(f"{kind}.json")))


def load_default(kind: str) -> ExperimentConfig:
    return ExperimentConfig.load(default_config_path(kind))


def load_acceptance() -> dict[str, Any]:
    """Thresholds and settings of the acceptance suite."""
    text = resources.files("qnndyn.configs").joinpath("acceptance.json").read_text()
    return json.loads(text)
