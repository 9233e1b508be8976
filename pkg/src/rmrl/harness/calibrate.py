"""Threshold calibration from two probes: random play right after a reset, and doing nothing."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..env import N_ACTIONS, Action, EnvConfig, Mode, TabletopEnv
from ..measures import MeasureConfig, dispersion, max_min_distance

# quartiles are floored before the geometric mean: an idle probe is exactly zero for every measure
DEFAULT_FLOOR = 1e-4


@dataclass
class Calibration:
    threshold: float
    active: np.ndarray
    idle: np.ndarray
    floor: float = DEFAULT_FLOOR

    def summary(self) -> dict:
        q = lambda v, p: float(np.quantile(v, p))
        return {
            "threshold": self.threshold,
            "active": {"n": int(self.active.size), "q25": q(self.active, 0.25), "median": q(self.active, 0.5)},
            "idle": {"n": int(self.idle.size), "median": q(self.idle, 0.5), "q75": q(self.idle, 0.75)},
            "floor": self.floor,
        }


def threshold_between(active, idle, floor: float = DEFAULT_FLOOR) -> float:
    """Geometric mean of the active probe's lower quartile and the idle probe's upper quartile."""
    lo = max(float(np.quantile(active, 0.25)), floor)
    hi = max(float(np.quantile(idle, 0.75)), floor)
    return math.sqrt(lo * hi)


def window_value(states, cfg: MeasureConfig) -> float:
    """The measure's value on one full horizon of states."""
    if cfg.kind.is_dispersion:
        return dispersion(states, cfg)
    return max_min_distance(states, cfg.window, cfg.horizon, cfg.kind)


def trajectory_values(trajectories, cfg: MeasureConfig) -> np.ndarray:
    """Measure values of every non-overlapping horizon-aligned window of each trajectory."""
    out = []
    for traj in trajectories:
        traj = np.asarray(traj, dtype=np.float64)
        for start in range(0, traj.shape[0] - cfg.horizon + 1, cfg.horizon):
            out.append(window_value(traj[start : start + cfg.horizon], cfg))
    return np.asarray(out)


def calibrate_from_trajectories(active_trajs, idle_trajs, cfg: MeasureConfig,
                                floor: float = DEFAULT_FLOOR) -> Calibration:
    active = trajectory_values(active_trajs, cfg)
    idle = trajectory_values(idle_trajs, cfg)
    if active.size == 0 or idle.size == 0:
        raise ValueError(f"probes must contain at least one full horizon of {cfg.horizon} states")
    return Calibration(threshold_between(active, idle, floor), active, idle, floor)


def probe_values(env_cfg: EnvConfig, measure_cfg: MeasureConfig, policy: str, probe_steps: int, seed: int = 0,
                 workers: int = 8) -> np.ndarray:
    """Object-position measure values over windows that each start from a fresh reset.

    ``policy`` is ``"random"`` (uniform actions) or ``"noop"`` (Release with an
    empty gripper, which never changes the world).
    """
    horizon = measure_cfg.horizon
    n_windows = probe_steps // horizon
    if n_windows < 1:
        raise ValueError(f"probe_steps={probe_steps} is shorter than one horizon of {horizon} steps")
    if policy not in ("random", "noop"):
        raise ValueError(f"unknown probe policy {policy!r}")
    env_ss, act_ss = np.random.SeedSequence(seed).spawn(2)
    env = TabletopEnv(workers, env_cfg, rngs=[np.random.default_rng(s) for s in env_ss.spawn(workers)])
    act_rng = np.random.default_rng(act_ss)
    values = []
    while len(values) < n_windows:
        n = min(workers, n_windows - len(values))
        for i in range(workers):
            env.reset(i, Mode.TRAIN)
        traj = np.zeros((horizon, workers, 2))
        for t in range(horizon):
            if policy == "random":
                actions = act_rng.integers(N_ACTIONS, size=workers)
            else:
                actions = np.full(workers, int(Action.RELEASE))
            env.step(actions)
            traj[t] = env.object
        values.extend(window_value(traj[:, i], measure_cfg) for i in range(n))
    return np.asarray(values)


def calibrate_threshold(config, probe_steps: int, seed=None, floor: float = DEFAULT_FLOOR) -> Calibration:
    """Run both probes for ``probe_steps`` steps each and place the threshold between them."""
    if config.measure is None:
        raise ValueError("config has no measure section")
    seed = config.run.seed if seed is None else seed
    active = probe_values(config.env, config.measure, "random", probe_steps, seed, config.run.workers)
    idle = probe_values(config.env, config.measure, "noop", probe_steps, seed + 1, config.run.workers)
    return Calibration(threshold_between(active, idle, floor), active, idle, floor)
