"""Run configuration: defaults, TOML loading, ``key=value`` overrides."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from .models import CounterexampleParams, ModelParams
from .ode import SolverSettings

__all__ = ["ConfigError", "RunConfig", "load_config", "SWEEPABLE"]

SWEEPABLE = ("r", "h", "m", "mu", "beta")


class ConfigError(ValueError):
    """Invalid configuration; ``field`` names the offending key."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


@dataclass(frozen=True)
class RunConfig:
    # model
    r: float = 2.0
    h: float = 0.3
    m: float = 0.3
    mu: float = 0.5
    beta: float = 1.3
    # solver
    rtol: float = 1e-9
    atol: float = 1e-13
    h_max: float = 0.5
    max_steps: int = 1_000_000
    guard: bool = True
    # experiments
    t_end: float = 2000.0
    n_seeds: int = 20
    seed: int = 0
    n_phase: int = 256
    horizon_periods: float = 10.0
    floor: float = 1e-6
    tail_fraction: float = 0.25
    # sweep
    sweep_param: str = "beta"
    sweep_min: float = 1.0
    sweep_max: float = 1.6
    sweep_points: int = 7
    # counterexample
    eps: float = 0.1
    delta: float = 0.1
    x0: float = 0.1
    y0: float = 0.1
    z0: float = 15.0
    ce_t_end: float = 150.0

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, float) and not math.isfinite(v):
                raise ConfigError(f.name, f"must be finite, got {v!r}")
        for name in ("r", "h", "m", "mu", "beta", "rtol", "atol", "h_max", "t_end",
                     "horizon_periods", "floor", "eps", "delta", "ce_t_end"):
            if getattr(self, name) <= 0:
                raise ConfigError(name, f"must be > 0, got {getattr(self, name)!r}")
        for name in ("max_steps", "n_seeds"):
            if getattr(self, name) < 1:
                raise ConfigError(name, f"must be >= 1, got {getattr(self, name)!r}")
        if self.n_phase < 2:
            raise ConfigError("n_phase", f"must be >= 2, got {self.n_phase!r}")
        if not 0 < self.tail_fraction < 1:
            raise ConfigError("tail_fraction", f"must lie in (0, 1), got {self.tail_fraction!r}")
        if self.sweep_param not in SWEEPABLE:
            raise ConfigError("sweep_param", f"must be one of {', '.join(SWEEPABLE)}, got {self.sweep_param!r}")
        if not self.sweep_min < self.sweep_max:
            raise ConfigError("sweep_max", "sweep_min must be < sweep_max")
        if self.sweep_points < 2:
            raise ConfigError("sweep_points", f"must be >= 2, got {self.sweep_points!r}")
        if self.sweep_min <= 0:
            raise ConfigError("sweep_min", "swept parameters must stay positive")
        if min(self.x0, self.y0, self.z0) < 0:
            raise ConfigError("z0", "counterexample start must be nonnegative")

    @property
    def params(self) -> ModelParams:
        return ModelParams(self.r, self.h, self.m, self.mu, self.beta)

    @property
    def counter(self) -> CounterexampleParams:
        return CounterexampleParams(self.eps, self.delta)

    @property
    def solver(self) -> SolverSettings:
        return SolverSettings(
            rtol=self.rtol, atol=self.atol, h_init=min(1e-3, self.h_max), h_max=self.h_max,
            max_steps=self.max_steps, nonneg=self.guard,
        )

    def as_dict(self) -> dict:
        return asdict(self)

    def to_toml(self) -> str:
        lines = []
        for k, v in self.as_dict().items():
            if isinstance(v, bool):
                s = "true" if v else "false"
            elif isinstance(v, str):
                s = f'"{v}"'
            elif isinstance(v, float):
                s = repr(v)
            else:
                s = str(v)
            lines.append(f"{k} = {s}")
        return "\n".join(lines) + "\n"


_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _coerce(key: str, value):
    if key not in _TYPES:
        raise ConfigError(key, "unknown key")
    kind = _TYPES[key]
    try:
        if kind == "bool":
            if isinstance(value, bool):
                return value
            low = str(value).strip().lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(value)
        if kind == "int":
            if isinstance(value, bool) or (isinstance(value, float) and not value.is_integer()):
                raise ValueError(value)
            return int(value) if not isinstance(value, str) else int(value.strip())
        if kind == "float":
            if isinstance(value, bool):
                raise ValueError(value)
            return float(value)
        return str(value)
    except (TypeError, ValueError):
        raise ConfigError(key, f"expected {kind}, got {value!r}") from None


def load_config(path: str | None = None, overrides: list[str] | None = None, **direct) -> RunConfig:
    """Defaults, then the TOML file at ``path``, then ``key=value`` overrides."""
    vals: dict = {}
    if path:
        try:
            with open(path, "rb") as fh:
                doc = tomllib.load(fh)
        except OSError as exc:
            raise ConfigError("config", f"cannot read {path}: {exc.strerror}") from None
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError("config", f"{path}: {exc}") from None
        for k, v in doc.items():
            if isinstance(v, dict):
                raise ConfigError(k, "config must be flat (no tables)")
            vals[k] = _coerce(k, v)
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(item, "expected key=value")
        k, v = item.split("=", 1)
        vals[k.strip()] = _coerce(k.strip(), v)
    for k, v in direct.items():
        if v is not None:
            vals[k] = _coerce(k, v)
    return RunConfig(**vals)
