"""Run configuration as a flat ``key = value`` document."""

from __future__ import annotations

import os
from dataclasses import dataclass, fields, replace
from pathlib import Path

from .geometry import Params

SEED_ENV = "CATATTR_SEED"
_U64 = (1 << 64) - 1


class ConfigError(ValueError):
    """Malformed or out-of-schema configuration."""


@dataclass(frozen=True)
class RunConfig:
    epsilon: float = 0.08
    sigma: float = 0.01
    b: float = 0.005
    beta: float = 0.005
    phi: float = 0.009
    seed: int = 20240601
    particles: int = 10_000
    steps: int = 2500
    snapshot_every: int = 10
    delta: float = 0.01
    n_max_layers: int = 20
    threads: int = 0  # 0 = one per core
    out_dir: str = "out"
    segment_bins: int = 200
    segment_steps: int = 10_000_000
    blend_sharpness: float = 1.0
    return_n: int = 10
    return_trials: int = 1000

    def __post_init__(self):
        positive = ("particles", "snapshot_every", "n_max_layers", "segment_bins",
                    "segment_steps", "return_trials")
        for name in positive:
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.steps < 0:
            raise ConfigError("steps must be >= 0")
        if self.threads < 0:
            raise ConfigError("threads must be >= 0")
        if not 0 <= self.seed <= _U64:
            raise ConfigError("seed must fit in 64 unsigned bits")
        if not self.delta > 0:
            raise ConfigError("delta must be positive")
        if not self.blend_sharpness > 0:
            raise ConfigError("blend_sharpness must be positive")
        if self.return_n < 3:
            raise ConfigError("return_n must be >= 3")
        try:
            self.params
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    @property
    def params(self) -> Params:
        return Params(self.epsilon, self.sigma, self.b, self.beta, self.phi)

    @property
    def out_path(self) -> Path:
        return Path(self.out_dir)

    def to_text(self) -> str:
        """Canonical serialisation: every key, fixed order, repr-exact floats."""
        out = []
        for f in fields(self):
            v = getattr(self, f.name)
            out.append(f"{f.name} = {v if isinstance(v, str) else repr(v)}\n")
        return "".join(out)

    @classmethod
    def from_text(cls, text: str) -> "RunConfig":
        types = {f.name: f.type for f in fields(cls)}
        values: dict[str, object] = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, val = line.partition("=")
            key, val = key.strip(), val.strip()
            if not sep or not key:
                raise ConfigError(f"line {lineno}: expected key = value")
            if key not in types:
                raise ConfigError(f"line {lineno}: unknown key {key!r}")
            if key in values:
                raise ConfigError(f"line {lineno}: duplicate key {key!r}")
            values[key] = _convert(key, types[key], val, lineno)
        return cls(**values)

    @classmethod
    def load(cls, path: str | os.PathLike) -> "RunConfig":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read {path}: {exc}") from exc
        return cls.from_text(text)

    def with_overrides(self, env=None, **flags) -> "RunConfig":
        """Apply the seed environment variable, then any non-None flags."""
        env = os.environ if env is None else env
        changes = {}
        if env.get(SEED_ENV):
            changes["seed"] = _convert("seed", "int", env[SEED_ENV], 0)
        changes.update({k: v for k, v in flags.items() if v is not None})
        return replace(self, **changes) if changes else self


def _convert(key: str, typ: str, val: str, lineno: int):
    try:
        if typ == "int":
            return int(val, 0)
        if typ == "float":
            return float(val)
        return val
    except ValueError:
        raise ConfigError(f"line {lineno}: {key} expects {typ}, got {val!r}") from None
