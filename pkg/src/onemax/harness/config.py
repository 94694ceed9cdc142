"""Experiment configuration: defaults, key=value files and flag overrides."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping, Optional

from onemax.core import ProblemParams
from onemax.errors import ConfigError, DomainError
from onemax.thresholds import ThresholdSpec, lambda_to_r

KINDS = (
    "pareto-check",
    "sweep-mult",
    "sweep-add",
    "brittleness",
    "stochastic-bounds",
    "ot-bounds",
    "real-data",
    "quad-surface",
)

# per-kind defaults for the knobs whose natural size depends on the experiment
_KIND_DEFAULTS: dict[str, dict[str, Any]] = {
    "pareto-check": {"grid": 10_000, "trials": 1, "n": 100_000},
    "sweep-mult": {"grid": 21, "trials": 500},
    "sweep-add": {"grid": 9, "trials": 500},
    "brittleness": {"grid": 5, "trials": 1, "n": 100_000, "rho": (0.0, 1.0)},
    "stochastic-bounds": {"grid": 5, "trials": 20_000},
    "ot-bounds": {"grid": 20, "trials": 20},
    "real-data": {"grid": 11, "trials": 50, "rho": (0.0, 1.0)},
    "quad-surface": {"grid": 10, "trials": 1},
}


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything an experiment driver needs; see README for the meaning per kind."""

    kind: str
    theta: float = 5.0
    lam: Optional[float] = None
    r: Optional[float] = None
    rho: Optional[tuple[float, ...]] = None
    n: Optional[int] = None
    grid: Optional[int] = None
    trials: Optional[int] = None
    seed: int = 0
    input: Optional[str] = None
    out: Optional[str] = None
    pgrid: int = 40
    delta: float = 0.01
    window: int = 100_800
    windows: int = 100
    replace_prob: float = 0.75
    gbm_drift: float = 0.0
    gbm_vol: float = 0.001
    gbm_low: Optional[float] = None
    gbm_high: Optional[float] = None
    gbm_windows: int = 26
    atoms: int = 20
    theta_max: float = 10.0
    s_max: float = 5.0
    workers: int = 1

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown experiment kind {self.kind!r}")
        defaults = _KIND_DEFAULTS[self.kind]
        fallback = {"rho": (0.0, 0.5, 1.0), "n": 10_000}
        for name in ("grid", "trials", "rho", "n"):
            if getattr(self, name) is None:
                object.__setattr__(self, name, defaults.get(name, fallback.get(name)))
        object.__setattr__(self, "rho", tuple(float(x) for x in self.rho))
        self._validate()

    def _validate(self):
        if self.lam is not None and self.r is not None:
            raise ConfigError("give exactly one of lambda and r")
        if not (0 <= self.seed < 2 ** 64):
            raise ConfigError("seed must be a 64-bit unsigned integer")
        for name in ("trials", "grid", "pgrid", "windows", "window", "atoms", "workers"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.n < 2:
            raise ConfigError("n must be >= 2")
        if not self.rho or any(not (0.0 <= x <= 1.0) for x in self.rho):
            raise ConfigError("rho values must lie in [0, 1]")
        if not (0.0 <= self.replace_prob <= 1.0):
            raise ConfigError("replace_prob must lie in [0, 1]")
        if not (self.delta > 0):
            raise ConfigError("delta must be positive")
        if self.gbm_windows < 2:
            raise ConfigError("gbm_windows must be >= 2")
        if (self.gbm_low is None) != (self.gbm_high is None):
            raise ConfigError("gbm_low and gbm_high go together")
        if self.kind != "real-data":
            try:
                self.threshold_spec()
            except DomainError as exc:
                raise ConfigError(str(exc)) from exc

    @property
    def params(self) -> ProblemParams:
        return ProblemParams(self.theta)

    def resolve_r(self, params: Optional[ProblemParams] = None) -> float:
        """``r`` from the config; lambda defaults to 0.5 when neither is given."""
        params = params or self.params
        if self.r is not None:
            return self.r
        return lambda_to_r(0.5 if self.lam is None else self.lam, params)

    def resolve_lambda(self, params: Optional[ProblemParams] = None) -> float:
        params = params or self.params
        if self.r is None:
            return 0.5 if self.lam is None else self.lam
        return 2.0 * (1.0 + math.log(self.r) / math.log(params.theta))

    def threshold_spec(self, rho: float = 1.0, params: Optional[ProblemParams] = None) -> ThresholdSpec:
        params = params or self.params
        return ThresholdSpec(self.resolve_r(params), rho, params)

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)


_FIELDS = {f.name: f for f in dataclasses.fields(ExperimentConfig)}
_ALIASES = {"lambda": "lam"}


def _coerce(name: str, raw: Any) -> Any:
    if raw is None:
        return None
    if name == "rho":
        if isinstance(raw, str):
            parts = [p for p in raw.replace(";", ",").split(",") if p.strip()]
            return tuple(float(p) for p in parts)
        return tuple(float(x) for x in raw)
    if name in ("kind", "input", "out"):
        return str(raw)
    default = _FIELDS[name].default
    if name in ("lam", "r", "gbm_low", "gbm_high") or isinstance(default, float):
        return float(raw)
    if isinstance(default, int) or name in ("grid", "trials", "n"):
        value = float(raw) if isinstance(raw, str) and any(c in raw for c in ".eE") else raw
        if isinstance(value, float) and not value.is_integer():
            raise ValueError(f"{raw!r} is not an integer")
        return int(value)
    return raw


def normalize_keys(values: Mapping[str, Any]) -> dict[str, Any]:
    out = {}
    for key, raw in values.items():
        name = _ALIASES.get(key.strip().replace("-", "_"), key.strip().replace("-", "_"))
        if name not in _FIELDS:
            raise ConfigError(f"unknown config key {key!r}")
        try:
            out[name] = _coerce(name, raw)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value for {key!r}: {raw!r}") from exc
    return out


def read_config_file(path: str | Path) -> dict[str, Any]:
    """Parse flat ``key=value`` lines; ``#`` starts a comment, blank lines are skipped."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc.strerror}") from exc
    values: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value")
        key, value = (part.strip() for part in line.split("=", 1))
        values[key] = value
    return normalize_keys(values)


def build_config(kind: str, file_values: Mapping[str, Any], flag_values: Mapping[str, Any]) -> ExperimentConfig:
    """Merge file values with flags (flags win) for the given subcommand."""
    merged = dict(file_values)
    merged.update({k: v for k, v in normalize_keys(flag_values).items() if v is not None})
    file_kind = merged.pop("kind", None)
    if file_kind is not None and file_kind != kind:
        raise ConfigError(f"config file is for {file_kind!r}, not {kind!r}")
    # a flag giving r overrides lambda from the file and vice versa
    if "r" in flag_values and flag_values["r"] is not None:
        merged.pop("lam", None)
    if "lambda" in flag_values and flag_values["lambda"] is not None:
        merged.pop("r", None)
    try:
        return ExperimentConfig(kind=kind, **merged)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
