"""Reset rules and goal schedules for the four training regimes.

* ``episodic``: full reset at the end of every phase, goal always the task goal.
* ``periodic``: random goals switched without resets; a reset every ``period`` steps.
* ``measure_led``: random goals; reset only when the NI detector fires.
* ``forward_backward_gt``: alternate the task goal and a designated initial
  state; reset every ``period`` steps or as soon as the object is in the gutter.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .env import EnvConfig, InitialStateGoal, Mode, PointGoal, goal_point, sample_goal
from .measures import MeasureVerdict
from .trajectory import PhaseOutcome, PhaseRecord, ResetCause


class StrategyKind(str, enum.Enum):
    EPISODIC = "episodic"
    PERIODIC = "periodic"
    MEASURE_LED = "measure_led"
    FORWARD_BACKWARD_GT = "forward_backward_gt"


@dataclass
class StrategyConfig:
    kind: StrategyKind = StrategyKind.MEASURE_LED
    period: Optional[int] = None

    def __post_init__(self):
        self.kind = StrategyKind(self.kind)
        periodic = self.kind in (StrategyKind.PERIODIC, StrategyKind.FORWARD_BACKWARD_GT)
        if periodic and (self.period is None or self.period < 1):
            raise ValueError(f"{self.kind.value} needs a positive period")
        if not periodic and self.period is not None:
            raise ValueError(f"{self.kind.value} takes no period")

    def validate_against(self, env: EnvConfig) -> None:
        if self.period is not None and self.period < env.max_phase_steps:
            raise ValueError(f"period {self.period} shorter than phase length {env.max_phase_steps}")


FORWARD, BACKWARD = "forward", "backward"


@dataclass
class PhaseManager:
    """Per-worker phase bookkeeping: counters, FB direction, closed phase records."""

    worker: int = 0
    phase_index: int = 0
    steps_since_reset: int = 0
    steps_in_phase: int = 0
    direction: str = FORWARD
    current: Optional[PhaseRecord] = None
    records: list = field(default_factory=list)
    keep_records: bool = True

    def start_phase(self, goal, step: int) -> PhaseRecord:
        self.current = PhaseRecord(self.phase_index, tuple(goal_point(goal)), int(step), direction=self.direction)
        self.steps_in_phase = 0
        return self.current

    def tick(self) -> None:
        self.steps_since_reset += 1
        self.steps_in_phase += 1

    def on_reset(self) -> None:
        self.steps_since_reset = 0
        self.steps_in_phase = 0
        self.direction = FORWARD


def should_reset(strategy: StrategyConfig, manager: PhaseManager, verdict: Optional[MeasureVerdict],
                 gt_irreversible: bool, phase_over: bool = False) -> Optional[ResetCause]:
    kind = strategy.kind
    if kind is StrategyKind.EPISODIC:
        return ResetCause.EPISODIC if phase_over else None
    if kind is StrategyKind.PERIODIC:
        return ResetCause.PERIODIC if manager.steps_since_reset >= strategy.period else None
    if kind is StrategyKind.MEASURE_LED:
        return ResetCause.MEASURE_NI if verdict is not None and verdict.ni else None
    if gt_irreversible:
        return ResetCause.GROUND_TRUTH
    if manager.steps_since_reset >= strategy.period:
        return ResetCause.PERIODIC
    return None


def _satisfied(goal, object_position, cfg: EnvConfig) -> bool:
    return bool(np.linalg.norm(goal_point(goal) - np.asarray(object_position)) <= cfg.success_tol)


def next_goal(strategy: StrategyConfig, manager: PhaseManager, rng: np.random.Generator, object_position,
              cfg: EnvConfig):
    """Goal for the phase about to start; never one the object already satisfies."""
    kind = strategy.kind
    if kind in (StrategyKind.PERIODIC, StrategyKind.MEASURE_LED):
        return sample_goal(Mode.TRAIN, rng, object_position, cfg)
    forward = PointGoal(cfg.forward_goal)
    if kind is StrategyKind.EPISODIC:
        return forward
    candidates = [p for p in cfg.initial_states if not _satisfied(p, object_position, cfg)]
    if manager.direction == FORWARD and not _satisfied(forward, object_position, cfg):
        return forward
    # forward goal already met: this phase becomes a backward one
    manager.direction = BACKWARD
    return InitialStateGoal(candidates[rng.integers(len(candidates))])


def on_phase_end(manager: PhaseManager, outcome: PhaseOutcome, step: int, strategy: Optional[StrategyConfig] = None):
    """Close the running phase; flips the FB direction and advances the phase index."""
    rec = manager.current.close(step, outcome)
    if manager.keep_records:
        manager.records.append(rec)
    if strategy is None or strategy.kind is StrategyKind.FORWARD_BACKWARD_GT:
        manager.direction = BACKWARD if manager.direction == FORWARD else FORWARD
    manager.phase_index += 1
    manager.current = None
    return manager, rec
