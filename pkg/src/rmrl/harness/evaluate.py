"""Episodic evaluation on freshly reset worlds; never touches the parameters."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..env import N_ACTIONS, OBS_DIM, EnvConfig, Mode, TabletopEnv, sample_goal
from ..learner import PolicyNet, act, greedy, load_checkpoint


@dataclass
class EvalResult:
    mode: Mode
    n_tasks: int
    success_rate: float
    mean_steps: float
    successes: np.ndarray
    lengths: np.ndarray


def evaluate_policy(net: Optional[PolicyNet], env_cfg: EnvConfig, mode: Mode = Mode.TRAIN, n_tasks: int = 200,
                    seed: int = 0, use_greedy: bool = False, policy=None) -> EvalResult:
    """Run ``n_tasks`` single-goal episodes of at most one phase length each.

    ``policy`` may replace the network with any ``obs -> actions`` callable
    (used for random-policy baselines).
    """
    if n_tasks < 1:
        raise ValueError("n_tasks must be at least 1")
    mode = Mode(mode)
    ss = np.random.SeedSequence(seed)
    env_ss, goal_ss, act_ss = ss.spawn(3)
    env = TabletopEnv(n_tasks, env_cfg, rngs=[np.random.default_rng(s) for s in env_ss.spawn(n_tasks)])
    goal_rngs = [np.random.default_rng(s) for s in goal_ss.spawn(n_tasks)]
    act_rng = np.random.default_rng(act_ss)
    for i in range(n_tasks):
        env.reset(i, mode)
        env.set_goal(i, sample_goal(mode, goal_rngs[i], env.object[i], env_cfg))
    done = np.zeros(n_tasks, dtype=bool)
    lengths = np.full(n_tasks, env_cfg.max_phase_steps, dtype=np.int64)
    for t in range(env_cfg.max_phase_steps):
        obs = env.observe()
        if policy is not None:
            actions = policy(obs)
        elif use_greedy:
            actions = greedy(net, obs)
        else:
            actions = act(net, obs, act_rng)[0]
        _, success, _ = env.step(actions)
        new = success & ~done
        lengths[new] = t + 1
        done |= success
        if done.all():
            break
    steps = lengths[done]
    return EvalResult(mode, n_tasks, float(done.mean()), float(steps.mean()) if steps.size else float("nan"),
                      done, lengths)


def random_policy(seed: int = 0):
    rng = np.random.default_rng(seed)
    return lambda obs: rng.integers(N_ACTIONS, size=len(obs))


def evaluate(checkpoint, mode: Mode = Mode.TRAIN, n_tasks: int = 200, seed: int = 0) -> EvalResult:
    from .config import from_dict

    net, _, _, meta = load_checkpoint(checkpoint)
    if net.obs_dim != OBS_DIM or net.n_actions != N_ACTIONS:
        raise ValueError(f"checkpoint network ({net.obs_dim} -> {net.n_actions}) does not fit the tabletop task")
    cfg = from_dict(meta["config"]) if "config" in meta else None
    env_cfg = cfg.env if cfg is not None else EnvConfig()
    use_greedy = cfg.run.eval_greedy if cfg is not None else False
    if cfg is not None and tuple(cfg.learner.hidden) != net.hidden:
        raise ValueError("checkpoint parameters do not match its stored config")
    return evaluate_policy(net, env_cfg, mode, n_tasks, seed, use_greedy)
