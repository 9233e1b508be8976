"""Small, fast configurations shared by the harness-level tests."""

from rmrl.env import EnvConfig
from rmrl.harness.config import ExperimentConfig, RunConfig
from rmrl.learner import OptimConfig
from rmrl.measures import MeasureConfig
from rmrl.strategies import StrategyConfig


def tiny_config(kind="periodic", period=1000, workers=2, steps=2000, seed=0, max_phase_steps=300,
                measure=None, **run):
    if measure is None:
        measure = MeasureConfig("std", horizon=100, threshold=1e-4)
    run_cfg = dict(workers=workers, total_steps=steps, seed=seed, eval_every=10**9, eval_tasks=4,
                   checkpoint_every=10**9)
    run_cfg.update(run)
    return ExperimentConfig(
        env=EnvConfig(max_phase_steps=max_phase_steps),
        learner=OptimConfig(hidden=(8, 8), epochs=1, minibatches=1, rollout_length=100),
        strategy=StrategyConfig(kind, period),
        measure=measure,
        run=RunConfig(**run_cfg),
    )
