"""Experiment configuration: YAML on disk, nested dataclasses in memory."""

from __future__ import annotations

import dataclasses
import enum
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import yaml

from ..env import EnvConfig
from ..learner import OptimConfig
from ..measures import MeasureConfig
from ..strategies import StrategyConfig, StrategyKind


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    workers: int = 8
    total_steps: int = 300_000
    seed: int = 0
    checkpoint_every: int = 25_000
    eval_every: int = 10_000
    eval_tasks: int = 200
    eval_seed: int = 12345
    eval_greedy: bool = False
    trace_every: int = 25

    def __post_init__(self):
        for name in ("workers", "total_steps", "checkpoint_every", "eval_every", "eval_tasks"):
            if getattr(self, name) < 1:
                raise ValueError(f"run.{name} must be positive")
        if self.trace_every < 0:
            raise ValueError("run.trace_every must be non-negative")


@dataclass
class ExperimentConfig:
    env: EnvConfig = field(default_factory=EnvConfig)
    learner: OptimConfig = field(default_factory=OptimConfig)
    strategy: StrategyConfig = field(default_factory=StrategyConfig)
    measure: Optional[MeasureConfig] = field(default_factory=MeasureConfig)
    run: RunConfig = field(default_factory=RunConfig)

    def __post_init__(self):
        self.strategy.validate_against(self.env)
        if self.strategy.kind is StrategyKind.MEASURE_LED and self.measure is None:
            raise ValueError("measure_led strategy needs a measure section")


_SECTIONS = {"env": EnvConfig, "learner": OptimConfig, "strategy": StrategyConfig,
             "measure": MeasureConfig, "run": RunConfig}


def _plain(value):
    if isinstance(value, enum.Enum):
        return value.value
    if isinstance(value, (tuple, list)):
        return [_plain(v) for v in value]
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    return value


def to_dict(cfg: ExperimentConfig) -> dict:
    out = {}
    for name in _SECTIONS:
        section = getattr(cfg, name)
        out[name] = None if section is None else {f.name: _plain(getattr(section, f.name)) for f in dataclasses.fields(section)}
    return out


def _build(cls, data: Any, where: str):
    if not isinstance(data, dict):
        raise ConfigError(f"section '{where}' must be a mapping")
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"unknown key(s) in '{where}': {', '.join(unknown)}")
    try:
        return cls(**data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid '{where}' section: {exc}") from exc


def from_dict(data: Any) -> ExperimentConfig:
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping of sections")
    unknown = sorted(set(data) - set(_SECTIONS))
    if unknown:
        raise ConfigError(f"unknown section(s): {', '.join(unknown)}")
    kwargs = {}
    for name, cls in _SECTIONS.items():
        if name not in data:
            continue
        if name == "measure" and data[name] is None:
            kwargs[name] = None
        else:
            kwargs[name] = _build(cls, data[name], name)
    try:
        return ExperimentConfig(**kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def dumps(cfg: ExperimentConfig) -> str:
    return yaml.safe_dump(to_dict(cfg), sort_keys=False)


def loads(text: str) -> ExperimentConfig:
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config is not valid YAML: {exc}") from exc
    return from_dict(data)


def load(path) -> ExperimentConfig:
    return loads(Path(path).read_text())


def save(cfg: ExperimentConfig, path) -> Path:
    path = Path(path)
    path.write_text(dumps(cfg))
    return path
