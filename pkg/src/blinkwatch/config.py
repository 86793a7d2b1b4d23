"""Run configuration: defaults, key=value config files, CLI precedence."""

from __future__ import annotations

from dataclasses import dataclass, fields
from pathlib import Path
from typing import Optional

from .errors import BlinkwatchError


class ConfigError(BlinkwatchError):
    pass


@dataclass
class RunConfig:
    face_model: Optional[str] = None
    eye_model: Optional[str] = None
    scale_factor: float = 1.2
    step_fraction: float = 0.05
    min_size: Optional[int] = None
    fps: float = 10.0
    closure_threshold: float = 2.0
    pitch_tolerance: float = 5.0
    perclos_window: float = 60.0
    strict: bool = False
    out: Optional[str] = None
    workers: int = 1

    def validate(self) -> None:
        if self.scale_factor <= 1.0:
            raise ConfigError("scale_factor must be > 1")
        if not 0.0 < self.step_fraction <= 1.0:
            raise ConfigError("step_fraction must be in (0, 1]")
        if self.min_size is not None and self.min_size < 1:
            raise ConfigError("min_size must be >= 1")
        if self.fps <= 0:
            raise ConfigError("fps must be > 0")
        if self.closure_threshold <= 0:
            raise ConfigError("closure_threshold must be > 0")
        if self.pitch_tolerance < 0:
            raise ConfigError("pitch_tolerance must be >= 0")
        if self.perclos_window <= 0:
            raise ConfigError("perclos_window must be > 0")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")

    def as_lines(self) -> list[str]:
        return [f"{f.name}={getattr(self, f.name)}" for f in fields(self)]


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}
_BOOL_TRUE = {"1", "true", "yes", "on"}
_BOOL_FALSE = {"0", "false", "no", "off"}


def _coerce(name: str, raw: str):
    if name in ("face_model", "eye_model", "out"):
        return raw
    if name == "strict":
        low = raw.lower()
        if low in _BOOL_TRUE:
            return True
        if low in _BOOL_FALSE:
            return False
        raise ConfigError(f"config key {name}: expected a boolean, got {raw!r}")
    if name in ("min_size", "workers"):
        try:
            return int(raw)
        except ValueError:
            raise ConfigError(f"config key {name}: expected an integer, got {raw!r}") from None
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"config key {name}: expected a number, got {raw!r}") from None


def parse_config_file(path) -> dict:
    """Plain key=value lines; '#' starts a comment, blank lines ignored."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} does not exist")
    values: dict = {}
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, _, raw = stripped.partition("=")
        key = key.strip().replace("-", "_")
        if key not in _FIELD_TYPES:
            raise ConfigError(f"{path}:{lineno}: unknown config key {key!r}")
        values[key] = _coerce(key, raw.strip())
    return values


def resolve_config(cli_values: dict, config_path=None) -> RunConfig:
    """Merge with precedence: CLI flags > config file > built-in defaults."""
    cfg = RunConfig()
    if config_path is not None:
        for key, value in parse_config_file(config_path).items():
            setattr(cfg, key, value)
    for key, value in cli_values.items():
        if value is not None:
            setattr(cfg, key, value)
    cfg.validate()
    return cfg
