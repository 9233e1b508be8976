"""Planar tabletop pick-and-place with pushing, release slip and an absorbing gutter.

The world is the unit square. A point gripper moves in 0.05 steps and can
pick up an object lying within the grasp radius. An object that is not held
is pushed along when the gripper moves through it; an object that leaves the
table (pushed, or rolling off after release) falls into the gutter and stays
there until a full reset. Objects close to an edge are easy to knock off and
awkward to grasp, which gives the near-irreversible states the detectors are
meant to find.

``TabletopEnv`` holds a batch of independent worlds (one per worker or per
evaluation task) with one random generator each. The single-state helpers
(``reset_full``, ``step``, ...) run the same dynamics on a batch of one.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .trajectory import as_state


class Action(enum.IntEnum):
    MOVE_X_PLUS = 0
    MOVE_X_MINUS = 1
    MOVE_Y_PLUS = 2
    MOVE_Y_MINUS = 3
    PICK_UP = 4
    RELEASE = 5


N_ACTIONS = len(Action)
OBS_DIM = 7

_DIRECTIONS = np.array(
    [[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0], [0.0, 0.0], [0.0, 0.0]], dtype=np.float64
)


class Mode(str, enum.Enum):
    TRAIN = "train"
    POS_OOD = "pos-ood"


@dataclass
class EnvConfig:
    move_step: float = 0.05
    grasp_radius: float = 0.06
    success_tol: float = 0.05
    gutter_margin: float = 0.0
    slip_std: float = 0.02
    max_phase_steps: int = 300
    reward_alpha: float = 1.0
    reward_beta: float = 10.0
    train_region: tuple = (0.2, 0.8)
    ood_region: tuple = (0.05, 0.95)
    gripper_band: tuple = (0.4, 0.6)
    forward_goal: tuple = (0.5, 0.7)
    initial_states: tuple = ((0.3, 0.3), (0.7, 0.3), (0.3, 0.5), (0.7, 0.5))

    def __post_init__(self):
        self.train_region = tuple(float(v) for v in self.train_region)
        self.ood_region = tuple(float(v) for v in self.ood_region)
        self.gripper_band = tuple(float(v) for v in self.gripper_band)
        self.forward_goal = tuple(float(v) for v in self.forward_goal)
        self.initial_states = tuple(tuple(float(v) for v in p) for p in self.initial_states)
        if self.move_step <= 0 or self.success_tol <= 0 or self.grasp_radius <= 0:
            raise ValueError("move_step, grasp_radius and success_tol must be positive")
        if self.max_phase_steps < 1:
            raise ValueError("max_phase_steps must be at least 1")
        if self.slip_std < 0:
            raise ValueError("slip_std must be non-negative")
        spatial = [self.move_step, self.grasp_radius, self.success_tol, self.gutter_margin,
                   *self.train_region, *self.ood_region, *self.gripper_band, *self.forward_goal]
        spatial += [v for p in self.initial_states for v in p]
        if any(v < 0 or v > 1 for v in spatial):
            raise ValueError("spatial parameters must lie in [0, 1]")
        if not self.initial_states:
            raise ValueError("initial_states must not be empty")

    def goal_region(self, mode: Mode) -> tuple:
        return self.train_region if Mode(mode) is Mode.TRAIN else self.ood_region


@dataclass
class EnvState:
    gripper: np.ndarray
    object: np.ndarray
    holding: bool = False
    in_gutter: bool = False
    step_in_phase: int = 0
    gutter_entry: Optional[np.ndarray] = None

    def __post_init__(self):
        self.gripper = as_state(self.gripper, 2)
        self.object = as_state(self.object, 2)
        self.holding = bool(self.holding)
        self.in_gutter = bool(self.in_gutter)
        if self.gutter_entry is not None:
            self.gutter_entry = as_state(self.gutter_entry, 2)

    def check(self, cfg: Optional[EnvConfig] = None) -> None:
        """Raise AssertionError if any state invariant is broken."""
        margin = cfg.gutter_margin if cfg is not None else 0.0
        assert np.all(self.gripper >= 0.0) and np.all(self.gripper <= 1.0), "gripper off table"
        off = np.any(self.object < -margin) or np.any(self.object > 1.0 + margin)
        if self.in_gutter:
            assert off and not self.holding, "gutter object must be off table and released"
        else:
            assert not off, "object off table but not in gutter"
        if self.holding:
            assert np.array_equal(self.object, self.gripper), "held object must be at the gripper"


@dataclass(frozen=True)
class PointGoal:
    position: tuple

    def __post_init__(self):
        object.__setattr__(self, "position", tuple(float(v) for v in self.position))


@dataclass(frozen=True)
class InitialStateGoal:
    """Backward goal of forward-backward training: one of the designated initial states."""

    position: tuple

    def __post_init__(self):
        object.__setattr__(self, "position", tuple(float(v) for v in self.position))


@dataclass(frozen=True)
class TaskSpec:
    goal: object
    mode: Mode = Mode.TRAIN


def goal_point(goal) -> np.ndarray:
    return np.asarray(goal.position if hasattr(goal, "position") else goal, dtype=np.float64)


def shaping_reward(d_prev, d_curr, success, cfg: EnvConfig):
    """Distance-difference reward plus a terminal success bonus."""
    return cfg.reward_alpha * (np.asarray(d_prev) - np.asarray(d_curr)) + cfg.reward_beta * np.asarray(success, dtype=np.float64)


def task_distance(gripper, obj, goal):
    """Gripper-to-object plus object-to-goal Euclidean distance."""
    return np.linalg.norm(np.asarray(obj) - gripper, axis=-1) + np.linalg.norm(np.asarray(goal) - obj, axis=-1)


def _off_table(obj: np.ndarray, margin: float) -> np.ndarray:
    return np.any((obj < -margin) | (obj > 1.0 + margin), axis=-1)


def apply_actions(gripper, obj, holding, gutter, actions, slip, cfg: EnvConfig):
    """Pure batched transition.

    ``slip`` holds the release noise for every row (only rows that actually
    release use it). Returns new ``(gripper, obj, holding, gutter, entered)``
    where ``entered`` flags rows that fell into the gutter on this step.
    """
    gripper = np.array(gripper, dtype=np.float64)
    obj = np.array(obj, dtype=np.float64)
    holding = np.array(holding, dtype=bool)
    gutter = np.array(gutter, dtype=bool)
    actions = np.asarray(actions, dtype=np.int64)

    target = np.clip(gripper + cfg.move_step * _DIRECTIONS[actions], 0.0, 1.0)
    delta = target - gripper
    span = np.linalg.norm(delta, axis=-1)
    moving = span > 0
    unit = np.where(moving[:, None], delta / np.where(moving, span, 1.0)[:, None], 0.0)
    rel = obj - gripper
    along = np.sum(rel * unit, axis=-1)
    lateral = np.linalg.norm(rel - along[:, None] * unit, axis=-1)
    push = moving & ~holding & ~gutter & (along > 0) & (along <= span) & (lateral <= cfg.grasp_radius)

    obj = np.where(holding[:, None], target, obj)
    obj = np.where(push[:, None], obj + delta, obj)
    gripper = target

    pick = (actions == Action.PICK_UP) & ~holding & ~gutter
    pick &= np.linalg.norm(obj - gripper, axis=-1) <= cfg.grasp_radius
    release = (actions == Action.RELEASE) & holding
    obj = np.where(pick[:, None], gripper, obj)
    obj = np.where(release[:, None], gripper + cfg.slip_std * np.asarray(slip, dtype=np.float64), obj)
    holding = (holding | pick) & ~release

    entered = ~gutter & ~holding & _off_table(obj, cfg.gutter_margin)
    return gripper, obj, holding, gutter | entered, entered


class TabletopEnv:
    """A batch of independent tabletop worlds with per-world generators."""

    def __init__(self, n: int, cfg: Optional[EnvConfig] = None, rngs: Optional[Sequence[np.random.Generator]] = None,
                 seed: Optional[int] = None):
        self.cfg = cfg or EnvConfig()
        self.n = int(n)
        if rngs is None:
            rngs = [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(self.n)]
        if len(rngs) != self.n:
            raise ValueError("need one generator per world")
        self.rngs = list(rngs)
        self.gripper = np.zeros((self.n, 2))
        self.object = np.zeros((self.n, 2))
        self.holding = np.zeros(self.n, dtype=bool)
        self.gutter = np.zeros(self.n, dtype=bool)
        self.entry = np.zeros((self.n, 2))
        self.goal = np.zeros((self.n, 2))
        self.step_in_phase = np.zeros(self.n, dtype=np.int64)

    # -- resets and goals ----------------------------------------------------
    def reset(self, i: int, mode: Mode = Mode.TRAIN) -> None:
        """Full reset of world ``i``: gripper in the centre band, object placed at random."""
        rng, cfg = self.rngs[i], self.cfg
        band = cfg.gripper_band
        region = cfg.goal_region(mode)
        self.gripper[i] = rng.uniform(band[0], band[1], size=2)
        self.object[i] = rng.uniform(region[0], region[1], size=2)
        self.holding[i] = False
        self.gutter[i] = False
        self.entry[i] = self.object[i]
        self.step_in_phase[i] = 0

    def set_goal(self, i: int, goal) -> None:
        g = goal_point(goal)
        if not self.gutter[i] and np.linalg.norm(self.object[i] - g) <= self.cfg.success_tol:
            raise ValueError("goal is already satisfied by the current object position")
        self.goal[i] = g
        self.step_in_phase[i] = 0

    # -- stepping --------------------------------------------------------------
    def step(self, actions):
        actions = np.asarray(actions, dtype=np.int64)
        cfg = self.cfg
        d_prev = task_distance(self.gripper, self.object, self.goal)
        slip = np.zeros((self.n, 2))
        for i in np.flatnonzero((actions == Action.RELEASE) & self.holding):
            slip[i] = self.rngs[i].standard_normal(2)
        g, o, h, gut, entered = apply_actions(self.gripper, self.object, self.holding, self.gutter, actions, slip, cfg)
        self.entry[entered] = np.clip(o[entered], 0.0, 1.0)
        self.gripper, self.object, self.holding, self.gutter = g, o, h, gut
        self.step_in_phase += 1
        success = self.success()
        d_curr = task_distance(self.gripper, self.object, self.goal)
        reward = shaping_reward(d_prev, d_curr, success, cfg)
        return reward, success, self.gutter.copy()

    def success(self) -> np.ndarray:
        dist = np.linalg.norm(self.object - self.goal, axis=-1)
        return ~self.holding & ~self.gutter & (dist <= self.cfg.success_tol)

    def observe(self, goal: Optional[np.ndarray] = None) -> np.ndarray:
        """(gripper, object - gripper, goal - gripper, holding); gutter objects show their entry point."""
        goal = self.goal if goal is None else goal
        seen = np.where(self.gutter[:, None], self.entry, self.object)
        return np.concatenate(
            [self.gripper, seen - self.gripper, goal - self.gripper, self.holding[:, None].astype(np.float64)], axis=1
        )

    # -- single-world views ----------------------------------------------------
    def state(self, i: int) -> EnvState:
        return EnvState(self.gripper[i].copy(), self.object[i].copy(), bool(self.holding[i]), bool(self.gutter[i]),
                        int(self.step_in_phase[i]), self.entry[i].copy() if self.gutter[i] else None)

    def load(self, i: int, state: EnvState) -> None:
        self.gripper[i] = state.gripper
        self.object[i] = state.object
        self.holding[i] = state.holding
        self.gutter[i] = state.in_gutter
        self.entry[i] = state.gutter_entry if state.gutter_entry is not None else np.clip(state.object, 0, 1)
        self.step_in_phase[i] = state.step_in_phase


# -- single-state helpers ------------------------------------------------------

def reset_full(seed=None, cfg: Optional[EnvConfig] = None, mode: Mode = Mode.TRAIN) -> EnvState:
    """Fresh world from a seed (int) or generator."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    env = TabletopEnv(1, cfg, rngs=[rng])
    env.reset(0, mode)
    return env.state(0)


def step(state: EnvState, action, goal, rng: Optional[np.random.Generator] = None,
         cfg: Optional[EnvConfig] = None):
    """One transition; returns ``(new_state, reward, success, gt_irreversible)``."""
    env = TabletopEnv(1, cfg, rngs=[rng if rng is not None else np.random.default_rng()])
    env.load(0, state)
    env.goal[0] = goal_point(goal)
    reward, success, gutter = env.step([int(action)])
    return env.state(0), float(reward[0]), bool(success[0]), bool(gutter[0])


def success_check(state: EnvState, goal, cfg: Optional[EnvConfig] = None) -> bool:
    cfg = cfg or EnvConfig()
    dist = np.linalg.norm(state.object - goal_point(goal))
    return (not state.holding) and (not state.in_gutter) and bool(dist <= cfg.success_tol)


def soft_goal_switch(state: EnvState, new_goal, cfg: Optional[EnvConfig] = None, mode: Mode = Mode.TRAIN):
    """New goal, same world. Rejects goals the current state already satisfies."""
    cfg = cfg or EnvConfig()
    if not state.in_gutter and np.linalg.norm(state.object - goal_point(new_goal)) <= cfg.success_tol:
        raise ValueError("goal is already satisfied by the current object position")
    new_state = replace(state, gripper=state.gripper.copy(), object=state.object.copy(), step_in_phase=0)
    return new_state, TaskSpec(new_goal, Mode(mode))


def sample_goal(mode: Mode, rng: np.random.Generator, object_position, cfg: Optional[EnvConfig] = None,
                max_tries: int = 100) -> PointGoal:
    """Uniform goal in the mode's region, away from the object's success ball."""
    cfg = cfg or EnvConfig()
    lo, hi = cfg.goal_region(mode)
    obj = np.asarray(object_position, dtype=np.float64)
    for _ in range(max_tries):
        g = rng.uniform(lo, hi, size=2)
        if np.linalg.norm(g - obj) > cfg.success_tol:
            return PointGoal(g)
    corners = np.array([[lo, lo], [lo, hi], [hi, lo], [hi, hi]])
    return PointGoal(corners[np.argmax(np.linalg.norm(corners - obj, axis=1))])
