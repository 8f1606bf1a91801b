#!/usr/bin/env python3
"""
Run Configuration Module

RunConfig holds every setting a polyheat run needs. It round-trips through a
flat mapping of dotted keys ("grid.points_per_axis"), which is also the YAML
config-file format and the config echo written into run manifests.
"""

import logging
import math
import os
from dataclasses import dataclass, field, fields, is_dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import yaml
from dotenv import load_dotenv

from polyheat.core.exceptions import ConfigError

logger = logging.getLogger(__name__)

OUTPUT_ENV_VAR = "POLYHEAT_OUT"

COMMANDS = (
    "kernel-profile",
    "verify-smoothing",
    "norm",
    "rearrange",
    "witness",
    "solve",
    "split-solve",
    "decay",
    "certify-log",
    "verify-gamma",
)


@dataclass
class GridSection:
    dimension: int = 1
    points_per_axis: int = 4096
    box_length: float = 256.0


@dataclass
class OperatorSection:
    d: int = 2
    majorant_exponent: Optional[float] = None
    profile_radii: int = 2048


@dataclass
class NonlinearitySection:
    m: float = 9.0
    lam: float = 1.0
    sign: int = 1


@dataclass
class SolverSection:
    T: float = 100.0
    steps: int = 400
    tol: float = 1e-20
    max_iter: int = 50
    eps: float = 0.1
    amplitude_cap: Optional[float] = None


@dataclass
class NormsSection:
    p: List[float] = field(default_factory=lambda: [2.0, 9.0, math.inf])


@dataclass
class DataSection:
    amplitude: float = 0.01
    width: float = 1.0
    input: Optional[str] = None
    witness: Optional[str] = None
    witness_r: Optional[float] = None
    alpha: Optional[float] = None
    phi: str = "expl2"
    corpus_size: int = 50
    samples: int = 10000


@dataclass
class RunConfig:
    """Complete, serializable configuration of one run."""

    command: str = "solve"
    grid: GridSection = field(default_factory=GridSection)
    operator: OperatorSection = field(default_factory=OperatorSection)
    nonlinearity: NonlinearitySection = field(default_factory=NonlinearitySection)
    solver: SolverSection = field(default_factory=SolverSection)
    norms: NormsSection = field(default_factory=NormsSection)
    data: DataSection = field(default_factory=DataSection)
    output_dir: str = "polyheat-runs"
    seed: int = 0

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ConfigError(f"Unknown command '{self.command}', expected one of {', '.join(COMMANDS)}")

    def to_flat(self) -> Dict[str, Any]:
        """Flatten to dotted keys; infinities are written as the string 'inf'."""
        flat: Dict[str, Any] = {}
        for f in fields(self):
            value = getattr(self, f.name)
            if is_dataclass(value):
                for sub in fields(value):
                    flat[f"{f.name}.{sub.name}"] = _encode(getattr(value, sub.name))
            else:
                flat[f.name] = _encode(value)
        return flat

    @classmethod
    def from_flat(cls, flat: Dict[str, Any]) -> "RunConfig":
        """Build a config from dotted keys over the defaults; unknown keys raise ConfigError."""
        config = cls()
        config.update(flat)
        return config

    def update(self, flat: Dict[str, Any]) -> "RunConfig":
        top_level = {f.name for f in fields(self)}
        for key, raw in flat.items():
            section_name, _, name = key.partition(".")
            if section_name not in top_level:
                raise ConfigError(f"Unknown config key: {key}")
            target = getattr(self, section_name)
            if name:
                if not is_dataclass(target) or name not in {f.name for f in fields(target)}:
                    raise ConfigError(f"Unknown config key: {key}")
                kind = {f.name: f.type for f in fields(target)}[name]
                setattr(target, name, _coerce(key, raw, kind))
            else:
                if is_dataclass(target):
                    raise ConfigError(f"Config key {key} names a section, not a value")
                kind = {f.name: f.type for f in fields(self)}[section_name]
                setattr(self, section_name, _coerce(key, raw, kind))
        self.__post_init__()
        return self


def _encode(value: Any) -> Any:
    if isinstance(value, float) and math.isinf(value):
        return "inf" if value > 0 else "-inf"
    if isinstance(value, list):
        return [_encode(v) for v in value]
    return value


def _to_float(key: str, raw: Any) -> float:
    if isinstance(raw, bool):
        raise ConfigError(f"{key}: expected a number, got {raw!r}")
    try:
        return float(raw)
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: expected a number, got {raw!r}") from None


def _coerce(key: str, raw: Any, kind: Any) -> Any:
    kind = str(kind)
    if raw is None:
        if "Optional" in kind:
            return None
        raise ConfigError(f"{key} may not be empty")
    if "List[float]" in kind:
        items = raw if isinstance(raw, (list, tuple)) else [raw]
        return [_to_float(key, v) for v in items]
    if "float" in kind:
        return _to_float(key, raw)
    if "int" in kind:
        value = _to_float(key, raw)
        if not value.is_integer():
            raise ConfigError(f"{key}: expected an integer, got {raw!r}")
        return int(value)
    return str(raw)


def _flatten(data: Dict[str, Any], prefix: str = "") -> Dict[str, Any]:
    flat: Dict[str, Any] = {}
    for key, value in data.items():
        full = f"{prefix}{key}"
        if isinstance(value, dict):
            flat.update(_flatten(value, f"{full}."))
        else:
            flat[full] = value
    return flat


def load_config(path: Union[str, Path]) -> Dict[str, Any]:
    """
    Read a YAML config file into a flat dotted-key mapping.

    Nested sections are accepted and flattened.
    """
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"Config file does not exist: {path}")
    try:
        with open(path) as f:
            data = yaml.safe_load(f) or {}
    except yaml.YAMLError as e:
        raise ConfigError(f"Invalid YAML in {path}: {e}") from e
    if not isinstance(data, dict):
        raise ConfigError(f"{path} must contain a mapping of config keys")
    logger.debug(f"Loaded {len(data)} config entries from {path}")
    return _flatten(data)


def save_config(config: RunConfig, path: Union[str, Path]) -> Path:
    path = Path(path)
    with open(path, "w") as f:
        yaml.safe_dump(config.to_flat(), f, sort_keys=True, default_flow_style=False)
    return path


def build_config(command: str, config_file: Optional[str] = None,
                 overrides: Optional[Dict[str, Any]] = None) -> RunConfig:
    """
    Defaults, then the config file, then POLYHEAT_OUT, then explicit overrides.

    Overrides with value None are ignored so unset CLI flags keep file values.
    """
    flat: Dict[str, Any] = load_config(config_file) if config_file else {}
    flat.pop("command", None)
    config = RunConfig(command=command).update(flat)
    load_dotenv(Path.cwd() / ".env")
    env_out = os.environ.get(OUTPUT_ENV_VAR)
    if env_out:
        logger.debug(f"{OUTPUT_ENV_VAR} sets output_dir to {env_out}")
        config.output_dir = env_out
    config.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return config
