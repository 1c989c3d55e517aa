"""Run configuration: a flat key=value text format with validated defaults."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, fields

from .core import Grid, Parameters, make_grid, make_parameters

PI_MODES = ("full", "special")
MODULATION_MODES = ("full", "reduced")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Config:
    alpha: float = 0.05
    delta: float | None = None
    k: int = 0
    z_min: float = 1e-2
    z_max: float = 1e4
    nz: int = 512
    ntheta: int = 128
    dt: float = 0.008
    s_max: float = 5.0
    eps0_amplitude: float | None = None
    pi0_amplitude: float | None = None
    nu: float = 0.01
    seed: int = 0
    pi_mode: str = "full"
    modulation: str = "full"

    def __post_init__(self):
        if self.delta is None:
            object.__setattr__(self, "delta", self.alpha / 2.0)
        # unset amplitudes split E(0) = nu alpha^(3/2) evenly between eps and Pi
        even = math.sqrt(self.nu * self.alpha**1.5 / 2.0) if self.nu > 0.0 and self.alpha > 0.0 else 0.0
        for name in ("eps0_amplitude", "pi0_amplitude"):
            if getattr(self, name) is None:
                object.__setattr__(self, name, even)
        # reuse the model constructors for their range checks
        try:
            self.parameters()
            self.grid()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if not self.dt > 0.0:
            raise ConfigError("dt must be > 0")
        if not self.s_max > 0.0:
            raise ConfigError("s_max must be > 0")
        if self.eps0_amplitude < 0.0 or self.pi0_amplitude < 0.0:
            raise ConfigError("amplitudes must be >= 0")
        if not self.nu > 0.0:
            raise ConfigError("nu must be > 0")
        if self.seed < 0:
            raise ConfigError("seed must be >= 0")
        if self.pi_mode not in PI_MODES:
            raise ConfigError(f"pi_mode must be one of {PI_MODES}")
        if self.modulation not in MODULATION_MODES:
            raise ConfigError(f"modulation must be one of {MODULATION_MODES}")

    def parameters(self) -> Parameters:
        return make_parameters(self.alpha, self.delta, self.k)

    def grid(self) -> Grid:
        return make_grid(self.z_min, self.z_max, self.nz, self.ntheta)

    def replace(self, **changes) -> "Config":
        return dataclasses.replace(self, **changes)

    def echo(self) -> str:
        """Effective configuration in the same key=value format."""
        return "\n".join(f"{f.name}={getattr(self, f.name)!r}".replace("'", "") for f in fields(self))


_INT_KEYS = {"k", "nz", "ntheta", "seed"}
_STR_KEYS = {"pi_mode", "modulation"}


def _convert(key: str, raw: str, lineno: int):
    try:
        if key in _INT_KEYS:
            return int(raw)
        if key in _STR_KEYS:
            return raw
        return float(raw)
    except ValueError:
        raise ConfigError(f"line {lineno}: cannot parse value {raw!r} for {key}") from None


def parse_config(text: str) -> Config:
    """Parse newline-delimited key=value pairs; '#' starts a comment."""
    known = {f.name for f in fields(Config)}
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {line!r}")
        key, raw = (part.strip() for part in line.split("=", 1))
        if key not in known:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if not raw:
            raise ConfigError(f"line {lineno}: empty value for {key}")
        values[key] = _convert(key, raw, lineno)
    return Config(**values)
