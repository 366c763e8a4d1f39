"""Run configuration: one JSON document, schema-versioned, with defaults.

Unknown keys and wrongly typed values are rejected with the dotted path of
the offending field.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import typing
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional

from .exceptions import ConfigError
from .losses import PHASE_GAUGES
from .noise import NoiseModel
from .optimizers import OptimizerConfig
from .rng import RNG_ALGORITHM

SCHEMA_VERSION = 1


def _spsa_defaults() -> OptimizerConfig:
    return OptimizerConfig(kind="spsa", a=0.1, c=0.4, A=150.0, max_episodes=400)


def _fdsa_defaults() -> OptimizerConfig:
    return OptimizerConfig(kind="fdsa", a=4.0, c=0.1, A=1000.0, max_episodes=1000)


@dataclass
class Stage1Config:
    episodes: int = 400
    batch_size: int = 10
    optimizer: OptimizerConfig = field(default_factory=_spsa_defaults)
    # target phase of the shape amplitude relative to the colour amplitude, per percept
    phase_offsets: List[float] = field(default_factory=lambda: [math.pi, 0.0, 0.0, 0.0])
    phase_gauge: str = "median"
    # train beamsplitter angles through |asin(sin u)| so amplitudes never change sign
    fold_beamsplitters: bool = True


@dataclass
class Stage2Config:
    episodes: int = 1000
    optimizer: OptimizerConfig = field(default_factory=_fdsa_defaults)
    mesh_init: str = "random"


@dataclass
class VarianceConfig:
    shots: List[int] = field(default_factory=lambda: [100, 1000, 10000, 100000, 1000000])
    trials: int = 10
    samplings: int = 10


@dataclass
class ClassicalConfig:
    stage1_episodes: int = 400
    stage2_episodes: int = 1000
    seeds: int = 1


@dataclass
class RunConfig:
    schema_version: int = SCHEMA_VERSION
    backend: str = "ideal"
    noise: NoiseModel = field(default_factory=NoiseModel)
    # 0 means exact probabilities; training and evaluation shots
    shots: int = 0
    eval_shots: int = 100000
    p_t_source: str = "auto"
    seed: int = 0
    stage1: Stage1Config = field(default_factory=Stage1Config)
    stage2: Stage2Config = field(default_factory=Stage2Config)
    variance: VarianceConfig = field(default_factory=VarianceConfig)
    classical: ClassicalConfig = field(default_factory=ClassicalConfig)
    rng_algorithm: str = RNG_ALGORITHM
    output_dir: str = "runs/default"
    checkpoint_every: int = 100
    log_interval: int = 100
    threads: int = 1

    def validate(self) -> "RunConfig":
        if self.schema_version != SCHEMA_VERSION:
            raise ConfigError(f"schema_version: unsupported version {self.schema_version}")
        if self.backend not in ("ideal", "noisy"):
            raise ConfigError(f"backend: expected 'ideal' or 'noisy', got {self.backend!r}")
        if self.shots < 0:
            raise ConfigError("shots: must be >= 0")
        if self.p_t_source not in ("auto", "exact", "empirical"):
            raise ConfigError(f"p_t_source: expected auto/exact/empirical, got {self.p_t_source!r}")
        if self.rng_algorithm != RNG_ALGORITHM:
            raise ConfigError(f"rng_algorithm: only {RNG_ALGORITHM} is available")
        if len(self.stage1.phase_offsets) != 4:
            raise ConfigError("stage1.phase_offsets: expected 4 values")
        if self.stage1.phase_gauge not in PHASE_GAUGES:
            raise ConfigError(f"stage1.phase_gauge: expected one of {PHASE_GAUGES}, got {self.stage1.phase_gauge!r}")
        if self.stage2.mesh_init not in ("random", "identity"):
            raise ConfigError(f"stage2.mesh_init: expected random/identity, got {self.stage2.mesh_init!r}")
        for name in ("episodes", "batch_size"):
            if getattr(self.stage1, name) < 1:
                raise ConfigError(f"stage1.{name}: must be >= 1")
        if self.stage2.episodes < 1:
            raise ConfigError("stage2.episodes: must be >= 1")
        if self.threads < 1:
            raise ConfigError("threads: must be >= 1")
        return self

    def to_dict(self) -> Dict[str, Any]:
        return dataclasses.asdict(self)

    def result_hash(self) -> str:
        """Hash of every field that can change results (not paths, logging or threads)."""
        doc = self.to_dict()
        for key in ("output_dir", "log_interval", "threads", "checkpoint_every"):
            doc.pop(key)
        blob = json.dumps(doc, sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def _build(cls, data: Any, path: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{path or '<root>'}: expected an object, got {type(data).__name__}")
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ConfigError(f"{path + '.' if path else ''}{unknown[0]}: unknown field")
    kwargs = {}
    for name, value in data.items():
        kwargs[name] = _coerce(hints[name], value, f"{path}.{name}" if path else name)
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path or '<root>'}: {exc}") from exc


def _coerce(tp, value, path: str):
    origin = typing.get_origin(tp)
    if dataclasses.is_dataclass(tp):
        return _build(tp, value, path)
    if origin is typing.Union:
        args = [a for a in typing.get_args(tp) if a is not type(None)]
        if value is None:
            return None
        return _coerce(args[0], value, path)
    if origin in (list, List):
        if not isinstance(value, list):
            raise ConfigError(f"{path}: expected a list")
        (inner,) = typing.get_args(tp)
        return [_coerce(inner, v, f"{path}[{i}]") for i, v in enumerate(value)]
    if tp is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{path}: expected true or false, got {value!r}")
        return value
    if tp is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{path}: expected a number, got {value!r}")
        return float(value)
    if tp is int:
        if isinstance(value, bool) or not isinstance(value, int):
            if isinstance(value, float) and value.is_integer():
                return int(value)
            raise ConfigError(f"{path}: expected an integer, got {value!r}")
        return value
    if tp is str:
        if not isinstance(value, str):
            raise ConfigError(f"{path}: expected a string, got {value!r}")
        return value
    return value


def config_from_dict(data: Dict[str, Any]) -> RunConfig:
    return _build(RunConfig, data, "").validate()


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    return config_from_dict(data)


def default_config_json() -> str:
    return json.dumps(RunConfig().to_dict(), indent=2)
