from collections import defaultdict

import numpy as np
import pytest

from helpers import tiny_config
from rmrl.env import EnvConfig, InitialStateGoal, PointGoal
from rmrl.harness.metrics import read_metrics
from rmrl.harness.train import train
from rmrl.measures import NO_CHECK, MeasureConfig, MeasureVerdict
from rmrl.strategies import (BACKWARD, FORWARD, PhaseManager, StrategyConfig, next_goal, on_phase_end,
                             should_reset)
from rmrl.trajectory import PhaseOutcome, ResetCause

CFG = EnvConfig()


def manager_at(steps):
    mgr = PhaseManager()
    for _ in range(steps):
        mgr.tick()
    return mgr


def test_strategy_config_validation():
    with pytest.raises(ValueError):
        StrategyConfig("periodic")
    with pytest.raises(ValueError):
        StrategyConfig("measure_led", 1000)
    with pytest.raises(ValueError):
        StrategyConfig("periodic", 100).validate_against(CFG)


def test_periodic_threshold():
    s = StrategyConfig("periodic", 1000)
    assert should_reset(s, manager_at(999), None, False) is None
    assert should_reset(s, manager_at(1000), None, False) is ResetCause.PERIODIC


def test_periodic_ignores_gutter():
    assert should_reset(StrategyConfig("periodic", 1000), manager_at(3), None, True) is None


def test_measure_led_follows_verdict():
    s = StrategyConfig("measure_led")
    assert should_reset(s, manager_at(5), MeasureVerdict(0.0, True, 5), False) is ResetCause.MEASURE_NI
    assert should_reset(s, manager_at(5), MeasureVerdict(0.5, False, 5), False) is None
    assert should_reset(s, manager_at(5), NO_CHECK, True) is None


def test_fb_ground_truth_is_immediate():
    s = StrategyConfig("forward_backward_gt", 5000)
    assert should_reset(s, manager_at(3), None, True) is ResetCause.GROUND_TRUTH
    assert should_reset(s, manager_at(5000), None, False) is ResetCause.PERIODIC
    assert should_reset(s, manager_at(4999), None, False) is None


def test_episodic_resets_at_phase_end():
    s = StrategyConfig("episodic")
    assert should_reset(s, manager_at(10), None, False, phase_over=True) is ResetCause.EPISODIC
    assert should_reset(s, manager_at(10), None, True, phase_over=False) is None


def test_random_goals_avoid_object():
    rng = np.random.default_rng(0)
    for kind in ("measure_led", "periodic"):
        s = StrategyConfig(kind, 1000 if kind == "periodic" else None)
        for _ in range(200):
            g = next_goal(s, PhaseManager(), rng, (0.5, 0.5), CFG)
            assert isinstance(g, PointGoal)
            assert np.linalg.norm(np.array(g.position) - 0.5) > CFG.success_tol


def test_episodic_goal_is_task_goal():
    g = next_goal(StrategyConfig("episodic"), PhaseManager(), np.random.default_rng(0), (0.2, 0.2), CFG)
    assert g == PointGoal(CFG.forward_goal)


def test_fb_goals_alternate():
    s = StrategyConfig("forward_backward_gt", 5000)
    mgr, rng = PhaseManager(), np.random.default_rng(0)
    kinds = []
    for k in range(10):
        g = next_goal(s, mgr, rng, (0.1, 0.9), CFG)
        mgr.start_phase(g, k * 10)
        kinds.append(type(g))
        on_phase_end(mgr, PhaseOutcome.TIMEOUT, k * 10 + 10, s)
    assert kinds == [PointGoal, InitialStateGoal] * 5
    assert PointGoal(CFG.forward_goal) == next_goal(s, PhaseManager(), rng, (0.1, 0.9), CFG)


def test_fb_forward_goal_already_met_becomes_backward():
    s = StrategyConfig("forward_backward_gt", 5000)
    mgr = PhaseManager()
    g = next_goal(s, mgr, np.random.default_rng(0), CFG.forward_goal, CFG)
    assert isinstance(g, InitialStateGoal) and mgr.direction == BACKWARD
    assert g.position in CFG.initial_states


def test_phase_outcomes_and_lengths():
    mgr = PhaseManager()
    mgr.start_phase(PointGoal((0.5, 0.5)), 0)
    _, rec = on_phase_end(mgr, PhaseOutcome.SUCCESS, 120)
    assert rec.length == 120 and rec.outcome is PhaseOutcome.SUCCESS
    mgr.start_phase(PointGoal((0.5, 0.5)), 120)
    _, rec = on_phase_end(mgr, PhaseOutcome.TIMEOUT, 420)
    assert rec.length == 300 and rec.outcome is PhaseOutcome.TIMEOUT
    assert [r.phase_index for r in mgr.records] == [0, 1]


def test_reset_restores_forward_direction():
    mgr = PhaseManager(direction=BACKWARD)
    mgr.tick()
    mgr.on_reset()
    assert mgr.direction == FORWARD and mgr.steps_since_reset == 0


# -- invariants on real training traces ------------------------------------------------

def _by_worker(records, kind):
    out = defaultdict(list)
    for r in records:
        if r["kind"] == kind:
            out[r["worker"]].append(r)
    return out


def test_periodic_reset_spacing(tmp_path):
    train(tiny_config("periodic", 300, workers=2, steps=2000, max_phase_steps=100), tmp_path)
    recs = list(read_metrics(tmp_path / "metrics.jsonl"))
    for resets in _by_worker(recs, "reset").values():
        assert resets[0]["cause"] == "initial"
        steps = [r["step"] for r in resets]
        assert np.all(np.diff(steps) == 300) and len(steps) == 1 + 2000 // 300


def test_measure_led_resets_follow_ni_verdicts(tmp_path):
    cfg = tiny_config("measure_led", None, workers=2, steps=3000,
                      measure=MeasureConfig("std", horizon=100, threshold=0.02, n_tol=2))
    train(cfg, tmp_path)
    recs = list(read_metrics(tmp_path / "metrics.jsonl"))
    ni = {(r["step"], r["worker"]) for r in recs if r["kind"] == "measure" and r["ni"]}
    resets = [r for r in recs if r["kind"] == "reset" and r["cause"] != "initial"]
    assert resets, "the threshold is high enough that an untrained policy triggers resets"
    assert all(r["cause"] == "measure_ni" and (r["step"], r["worker"]) in ni for r in resets)


def test_fb_alternates_within_reset_free_segments(tmp_path):
    train(tiny_config("forward_backward_gt", 400, workers=2, steps=3000, max_phase_steps=40), tmp_path)
    recs = list(read_metrics(tmp_path / "metrics.jsonl"))
    segments = defaultdict(list)
    seg = defaultdict(int)
    checked = 0
    for r in recs:
        if r["kind"] == "reset":
            seg[r["worker"]] += 1
        elif r["kind"] == "success" and r["outcome"] != "interrupted":
            segments[(r["worker"], seg[r["worker"]])].append(r["direction"])
    for dirs in segments.values():
        for a, b in zip(dirs, dirs[1:]):
            assert a != b
            checked += 1
    assert checked > 20
