"""Multi-worker training loop for every reset strategy.

Workers are stepped together as one batched environment (one generator per
worker), which keeps runs deterministic for a given seed and worker count.
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from ..env import N_ACTIONS, OBS_DIM, Mode, PointGoal, TabletopEnv, goal_point
from ..learner import Adam, NonFiniteLoss, PolicyNet, RolloutBatch, act, ppo_update, save_checkpoint, value_of
from ..measures import Detector
from ..strategies import FORWARD, PhaseManager, StrategyKind, next_goal, on_phase_end, should_reset
from ..trajectory import PhaseOutcome, ResetCause, ResetLog
from .config import ExperimentConfig, dumps, to_dict
from .evaluate import evaluate_policy
from .metrics import MetricsWriter

log = logging.getLogger(__name__)


@dataclass
class TrainResult:
    run_dir: Path
    steps: int
    resets: ResetLog
    evals: list = field(default_factory=list)
    checkpoint: Optional[Path] = None


def _r(x: float) -> float:
    return round(float(x), 6)


class Trainer:
    def __init__(self, cfg: ExperimentConfig, run_dir):
        self.cfg = cfg
        self.run_dir = Path(run_dir)
        self.run_dir.mkdir(parents=True, exist_ok=True)
        (self.run_dir / "config.yaml").write_text(dumps(cfg))
        w = cfg.run.workers
        env_ss, goal_ss, act_ss, init_ss, shuffle_ss = np.random.SeedSequence(cfg.run.seed).spawn(5)
        self.env = TabletopEnv(w, cfg.env, rngs=[np.random.default_rng(s) for s in env_ss.spawn(w)])
        self.goal_rngs = [np.random.default_rng(s) for s in goal_ss.spawn(w)]
        self.act_rng = np.random.default_rng(act_ss)
        self.shuffle_rng = np.random.default_rng(shuffle_ss)
        self.net = PolicyNet(OBS_DIM, N_ACTIONS, cfg.learner.hidden, seed=np.random.default_rng(init_ss))
        self.opt = Adam(self.net.size, cfg.learner.lr, cfg.learner.adam_betas, cfg.learner.adam_eps)
        self.managers = [PhaseManager(worker=i, keep_records=False) for i in range(w)]
        self.detectors = [Detector(cfg.measure) if cfg.measure is not None else None for _ in range(w)]
        self.resets = ResetLog()
        self.traces: list[list] = [[] for _ in range(w)]
        self.step = 0
        self.evals: list[dict] = []
        self.metrics = MetricsWriter(self.run_dir / "metrics.jsonl")
        self._updates = open(self.run_dir / "updates.jsonl", "w", encoding="utf-8")

    # -- phases and resets -----------------------------------------------------
    def _begin_phase(self, i: int) -> None:
        cfg, env, mgr = self.cfg, self.env, self.managers[i]
        forward = cfg.env.forward_goal
        if cfg.strategy.kind is StrategyKind.FORWARD_BACKWARD_GT and mgr.direction == FORWARD and \
                np.linalg.norm(env.object[i] - forward) <= cfg.env.success_tol:
            # the forward task already holds: log it as a zero-length success so directions keep alternating
            mgr.start_phase(PointGoal(forward), self.step)
            self.traces[i] = []
            self._end_phase(i, PhaseOutcome.SUCCESS)
        goal = next_goal(cfg.strategy, mgr, self.goal_rngs[i], env.object[i], cfg.env)
        # an episodic reset that lands on the task goal is redrawn as part of the same reset
        while cfg.strategy.kind is StrategyKind.EPISODIC and \
                np.linalg.norm(env.object[i] - goal_point(goal)) <= cfg.env.success_tol:
            env.reset(i, Mode.TRAIN)
        env.set_goal(i, goal)
        mgr.start_phase(goal, self.step)
        if self.detectors[i] is not None:
            self.detectors[i].buffer.mark_phase_start(self.step)
        self.traces[i] = []

    def _reset(self, i: int, cause: ResetCause) -> None:
        self.resets.add(self.step, i, cause)
        self.metrics.write(self.step, i, "reset", cause=cause.value, total=len(self.resets))
        self.env.reset(i, Mode.TRAIN)
        self.managers[i].on_reset()
        if self.detectors[i] is not None:
            self.detectors[i].reset()
        self._begin_phase(i)

    def _end_phase(self, i: int, outcome: PhaseOutcome) -> None:
        mgr = self.managers[i]
        _, rec = on_phase_end(mgr, outcome, self.step, self.cfg.strategy)
        payload = dict(outcome=outcome.value, phase=rec.phase_index, length=rec.length,
                       goal=[_r(v) for v in rec.goal], direction=rec.direction,
                       object=[_r(v) for v in self.env.object[i]])
        if self.cfg.run.trace_every:
            payload["trace"] = self.traces[i]
        self.metrics.write(self.step, i, "success", **payload)

    # -- evaluation and checkpoints --------------------------------------------
    def evaluate(self) -> None:
        run = self.cfg.run
        for mode in (Mode.TRAIN, Mode.POS_OOD):
            res = evaluate_policy(self.net, self.cfg.env, mode, run.eval_tasks, run.eval_seed, run.eval_greedy)
            rec = dict(mode=mode.value, success_rate=res.success_rate,
                       mean_steps=None if np.isnan(res.mean_steps) else _r(res.mean_steps),
                       resets=len(self.resets), total_steps=self.step * run.workers)
            self.evals.append(dict(step=self.step, **rec))
            self.metrics.write(self.step, -1, "eval", **rec)

    def checkpoint(self, name: str) -> Path:
        meta = {"config": to_dict(self.cfg), "resets": len(self.resets)}
        return save_checkpoint(self.run_dir / "checkpoints" / name, self.net, self.opt, self.step, meta)

    # -- main loop ---------------------------------------------------------------
    def _collect(self, length: int) -> RolloutBatch:
        cfg, env, w = self.cfg, self.env, self.cfg.run.workers
        horizon = cfg.env.max_phase_steps
        obs_buf = np.zeros((length, w, OBS_DIM))
        arrays = {k: np.zeros((length, w)) for k in ("logp", "reward", "value", "boot")}
        actions_buf = np.zeros((length, w), dtype=np.int64)
        flags = {k: np.zeros((length, w), dtype=bool) for k in ("terminal", "end", "reset", "timeout")}
        trace_every = cfg.run.trace_every
        obs = env.observe()
        for t in range(length):
            actions, logp, value = act(self.net, obs, self.act_rng)
            obs_buf[t], actions_buf[t] = obs, actions
            arrays["logp"][t], arrays["value"][t] = logp, value
            reward, success, gutter = env.step(actions)
            self.step += 1
            arrays["reward"][t] = reward
            timeout = (env.step_in_phase >= horizon) & ~success
            phase_over = success | timeout
            if timeout.any():
                rows = np.flatnonzero(timeout)
                arrays["boot"][t, rows] = value_of(self.net, env.observe()[rows])
            for i in range(w):
                mgr = self.managers[i]
                mgr.tick()
                verdict = None
                det = self.detectors[i]
                if det is not None:
                    verdict = det.update(env.object[i], self.step)
                    if verdict.checked:
                        self.metrics.write(self.step, i, "measure", measure=det.cfg.kind.value,
                                           value=_r(verdict.value), ni=verdict.ni)
                if trace_every and mgr.steps_in_phase % trace_every == 0:
                    self.traces[i].append([_r(env.object[i, 0]), _r(env.object[i, 1])])
                cause = should_reset(cfg.strategy, mgr, verdict, bool(gutter[i]), bool(phase_over[i]))
                if phase_over[i] or cause is not None:
                    outcome = (PhaseOutcome.SUCCESS if success[i] else
                               PhaseOutcome.TIMEOUT if timeout[i] else PhaseOutcome.INTERRUPTED)
                    self._end_phase(i, outcome)
                if cause is not None:
                    self._reset(i, cause)
                    flags["reset"][t, i] = True
                elif phase_over[i]:
                    self._begin_phase(i)
            flags["terminal"][t] = success | flags["reset"][t]
            flags["end"][t] = phase_over | flags["reset"][t]
            flags["timeout"][t] = timeout
            obs = env.observe()
        next_values = np.concatenate([arrays["value"][1:], value_of(self.net, obs)[None]], axis=0)
        next_values = np.where(flags["timeout"], arrays["boot"], next_values)
        return RolloutBatch(obs_buf, actions_buf, arrays["logp"], arrays["reward"], arrays["value"], next_values,
                            flags["terminal"], flags["end"], flags["reset"])

    def run(self) -> TrainResult:
        cfg, run = self.cfg, self.cfg.run
        t0 = time.time()
        for i in range(run.workers):
            self._reset(i, ResetCause.INITIAL)
        self.evaluate()
        last_ckpt = None
        try:
            while self.step < run.total_steps:
                before = self.step
                batch = self._collect(min(cfg.learner.rollout_length, run.total_steps - self.step))
                try:
                    stats = ppo_update(self.net, self.opt, batch, cfg.learner, self.shuffle_rng)
                except NonFiniteLoss:
                    last_ckpt = self.checkpoint(f"abort_{self.step:09d}.npz")
                    raise
                self._updates.write(json.dumps({"step": self.step, **{k: _r(v) for k, v in stats.items()}}) + "\n")
                for i in range(run.workers):
                    self.metrics.write(self.step, i, "reward", total=_r(batch.rewards[:, i].sum()),
                                       steps=int(batch.rewards.shape[0]))
                if self.step // run.eval_every > before // run.eval_every or self.step >= run.total_steps:
                    self.evaluate()
                if self.step // run.checkpoint_every > before // run.checkpoint_every:
                    last_ckpt = self.checkpoint(f"step_{self.step:09d}.npz")
                self.metrics.flush()
            last_ckpt = self.checkpoint("final.npz")
        finally:
            self.metrics.close()
            self._updates.close()
            with open(self.run_dir / "train.log", "a", encoding="utf-8") as fh:
                fh.write(f"steps={self.step} workers={run.workers} resets={len(self.resets)} "
                         f"wall_seconds={time.time() - t0:.1f}\n")
        return TrainResult(self.run_dir, self.step, self.resets, self.evals, last_ckpt)


def train(cfg: ExperimentConfig, run_dir) -> TrainResult:
    return Trainer(cfg, run_dir).run()
