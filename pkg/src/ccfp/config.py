"""Run configuration: a JSON document mapped onto frozen dataclasses.

Every section is optional and falls back to the defaults below.  Unknown
keys are rejected so that a typo never silently runs the default
experiment.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any

from .integrators import IntegratorKind
from .quadrature import RuleKind

MODEL_NAMES = ("opinion", "wealth", "cucker-smale", "network")


class ConfigError(ValueError):
    """Invalid or malformed run configuration."""


@dataclass(frozen=True)
class GridConfig:
    w_min: float = -1.0
    w_max: float = 1.0
    n: int = 41


@dataclass(frozen=True)
class QuadratureConfig:
    kind: str = "gauss"
    points: int = 8


@dataclass(frozen=True)
class TimeConfig:
    integrator: str = "rk4"
    dt: float | str = "auto"
    t_end: float = 1.0


@dataclass(frozen=True)
class OutputConfig:
    directory: str = "out"
    stride: int = 1
    emit_fields: bool = True


@dataclass(frozen=True)
class ConvergenceConfig:
    grids: tuple[int, ...] = (41, 81, 161)
    times: tuple[float, ...] = (1.0, 5.0, 10.0, 15.0)
    quadratures: tuple[str, ...] = ("midpoint", "onc4", "onc6", "gauss")
    fine_n: int = 641
    fine_times: tuple[float, ...] = (1.0, 5.0)
    fine_quadrature: str = "onc6"


@dataclass(frozen=True)
class FlockingConfig:
    x_min: float = -3.0
    x_max: float = 3.0
    dx: float = 0.06
    cfl: float = 0.25
    snapshot_times: tuple[float, ...] = (0.0, 0.6, 1.2, 3.0, 6.0, 9.0)
    velocity: float = 1.5
    x_width: float = 0.5
    w_width: float = 0.3


@dataclass(frozen=True)
class NetworkConfig:
    gamma0: float = 30.0
    snapshot_times: tuple[float, ...] = (0.0, 10.0, 50.0, 100.0)
    log_offset: float = 1e-3
    safety: float = 0.9


@dataclass(frozen=True)
class RunConfig:
    model: dict[str, Any] = field(default_factory=lambda: {"name": "opinion", "sigma2": 0.2})
    grid: GridConfig = GridConfig()
    initial: dict[str, Any] = field(default_factory=dict)
    quadrature: QuadratureConfig = QuadratureConfig()
    time: TimeConfig = TimeConfig()
    output: OutputConfig = OutputConfig()
    convergence: ConvergenceConfig = ConvergenceConfig()
    flocking: FlockingConfig = FlockingConfig()
    network: NetworkConfig = NetworkConfig()

    @property
    def model_name(self) -> str:
        return self.model["name"]

    def model_params(self) -> dict[str, Any]:
        return {k: v for k, v in self.model.items() if k != "name"}

    def with_overrides(self, *, directory: str | None = None, stride: int | None = None) -> "RunConfig":
        out = self.output
        if directory is not None:
            out = replace(out, directory=directory)
        if stride is not None:
            out = replace(out, stride=stride)
        cfg = replace(self, output=out)
        validate(cfg)
        return cfg

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


_SECTIONS = {
    "grid": GridConfig,
    "quadrature": QuadratureConfig,
    "time": TimeConfig,
    "output": OutputConfig,
    "convergence": ConvergenceConfig,
    "flocking": FlockingConfig,
    "network": NetworkConfig,
}


def _section(name: str, cls, raw: Any):
    if not isinstance(raw, dict):
        raise ConfigError(f"{name}: expected an object, got {type(raw).__name__}")
    known = {f.name: f for f in fields(cls)}
    unknown = sorted(set(raw) - set(known))
    if unknown:
        raise ConfigError(f"{name}: unknown field(s) {', '.join(unknown)}")
    values = {}
    for key, value in raw.items():
        default = getattr(cls(), key)
        where = f"{name}.{key}"
        if isinstance(default, tuple):
            if not isinstance(value, list):
                raise ConfigError(f"{where}: expected a list")
            kind = type(default[0]) if default else float
            value = tuple(_coerce(where, v, kind) for v in value)
        elif key == "dt":
            if value != "auto":
                value = _coerce(where, value, float)
        else:
            value = _coerce(where, value, type(default))
        values[key] = value
    return cls(**values)


def _coerce(where: str, value: Any, kind: type):
    if kind is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{where}: expected true/false")
        return value
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where}: expected an integer")
        return value
    if kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where}: expected a number")
        return float(value)
    if kind is str:
        if not isinstance(value, str):
            raise ConfigError(f"{where}: expected a string")
        return value
    raise ConfigError(f"{where}: unsupported value")


def validate(cfg: RunConfig) -> None:
    if cfg.model.get("name") not in MODEL_NAMES:
        raise ConfigError(f"model.name: expected one of {', '.join(MODEL_NAMES)}, got {cfg.model.get('name')!r}")
    if cfg.quadrature.kind not in {k.value for k in RuleKind}:
        raise ConfigError(f"quadrature.kind: unknown rule {cfg.quadrature.kind!r}")
    if cfg.quadrature.points < 1:
        raise ConfigError("quadrature.points: must be >= 1")
    if cfg.time.integrator not in {k.value for k in IntegratorKind}:
        raise ConfigError(f"time.integrator: unknown integrator {cfg.time.integrator!r}")
    if cfg.time.dt != "auto" and not cfg.time.dt > 0:
        raise ConfigError("time.dt: must be positive or \"auto\"")
    if not cfg.time.t_end >= 0:
        raise ConfigError("time.t_end: must be >= 0")
    if cfg.output.stride < 1:
        raise ConfigError("output.stride: must be >= 1")
    if cfg.grid.n < 3:
        raise ConfigError("grid.n: need at least 3 nodes")
    if not cfg.grid.w_max > cfg.grid.w_min:
        raise ConfigError("grid: w_max must exceed w_min")
    conv = cfg.convergence
    if len(conv.grids) < 2:
        raise ConfigError("convergence.grids: need at least two grid sizes")
    for q in conv.quadratures + (conv.fine_quadrature,):
        if q not in {k.value for k in RuleKind}:
            raise ConfigError(f"convergence: unknown quadrature {q!r}")


def from_dict(raw: Any) -> RunConfig:
    if not isinstance(raw, dict):
        raise ConfigError("top level: expected a JSON object")
    allowed = {f.name for f in fields(RunConfig)}
    unknown = sorted(set(raw) - allowed)
    if unknown:
        raise ConfigError(f"top level: unknown section(s) {', '.join(unknown)}")
    kwargs: dict[str, Any] = {}
    for name, cls in _SECTIONS.items():
        if name in raw:
            kwargs[name] = _section(name, cls, raw[name])
    for name in ("model", "initial"):
        if name in raw:
            if not isinstance(raw[name], dict):
                raise ConfigError(f"{name}: expected an object")
            kwargs[name] = dict(raw[name])
    cfg = RunConfig(**kwargs)
    validate(cfg)
    return cfg


def load(path: str | Path) -> RunConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    return from_dict(raw)
