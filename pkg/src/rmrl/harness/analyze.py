"""Turn metrics files into success-vs-steps / success-vs-resets tables and point clouds."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .metrics import MetricsError, read_metrics


@dataclass
class RunSummary:
    name: str
    workers: int
    evals: dict = field(default_factory=dict)  # mode -> list of eval records, file order
    resets: list = field(default_factory=list)  # (step, worker, cause, success_rate_at_reset)
    points: list = field(default_factory=list)  # (x, y, outcome)

    @property
    def total_resets(self) -> int:
        return len(self.resets)


def load_run(run_dir) -> RunSummary:
    run_dir = Path(run_dir)
    path = run_dir / "metrics.jsonl" if run_dir.is_dir() else run_dir
    if not path.exists():
        raise MetricsError(f"{path}: no metrics file")
    summary = RunSummary(name=run_dir.name, workers=0)
    workers = set()
    latest = math.nan
    for rec in read_metrics(path):
        kind = rec["kind"]
        if rec["worker"] >= 0:
            workers.add(rec["worker"])
        if kind == "eval":
            summary.evals.setdefault(rec["mode"], []).append(rec)
            if rec["mode"] == "train":
                latest = rec["success_rate"]
        elif kind == "reset":
            summary.resets.append((rec["step"], rec["worker"], rec["cause"], latest))
        elif kind == "success":
            for x, y in rec.get("trace", []):
                summary.points.append((x, y, rec["outcome"]))
    if not summary.resets and not summary.evals:
        raise MetricsError(f"{path}: empty metrics")
    summary.workers = len(workers)
    return summary


def smooth(values: Sequence[float], window: int = 1) -> np.ndarray:
    """Trailing moving average."""
    v = np.asarray(values, dtype=np.float64)
    if window <= 1 or v.size == 0:
        return v
    c = np.concatenate([[0.0], np.cumsum(v)])
    idx = np.arange(1, v.size + 1)
    lo = np.maximum(idx - window, 0)
    return (c[idx] - c[lo]) / (idx - lo)


def steps_table(summary: RunSummary, mode: str = "train", smoothing: int = 1) -> list[tuple]:
    """Rows ``(step, total_steps, resets, success_rate, smoothed)``."""
    evals = summary.evals.get(mode, [])
    sm = smooth([e["success_rate"] for e in evals], smoothing)
    return [(e["step"], e["total_steps"], e["resets"], e["success_rate"], float(s)) for e, s in zip(evals, sm)]


def resets_table(summary: RunSummary) -> list[tuple]:
    """Step function of train success against cumulative resets: one row per reset."""
    return [(k + 1, step, rate) for k, (step, _, _, rate) in enumerate(summary.resets)]


def first_crossing(summary: RunSummary, level: float, mode: str = "train", smoothing: int = 1) -> Optional[dict]:
    """First evaluation whose (smoothed) success reaches ``level``."""
    for step, total, resets, rate, sm in steps_table(summary, mode, smoothing):
        if sm >= level:
            return {"step": step, "total_steps": total, "resets": resets, "success_rate": rate}
    return None


def align_on_resets(summaries: Sequence[RunSummary], mode: str = "train") -> list[tuple]:
    """Shared reset axis: union of every run's eval reset counts, each run as a step function."""
    grid = sorted({e["resets"] for s in summaries for e in s.evals.get(mode, [])})
    rows = []
    for r in grid:
        row = [r]
        for s in summaries:
            val = math.nan
            for e in s.evals.get(mode, []):
                if e["resets"] <= r:
                    val = e["success_rate"]
            row.append(val)
        rows.append(tuple(row))
    return rows


def _write(path: Path, header: Sequence[str], rows) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\t".join(header) + "\n")
        for row in rows:
            fh.write("\t".join("nan" if isinstance(v, float) and math.isnan(v) else str(v) for v in row) + "\n")


def analyze(run_dirs, out_dir=None, smoothing: int = 1) -> dict:
    """Write per-run tables (next to the metrics unless ``out_dir`` is given).

    Returns ``{"runs": {name: summary}, "errors": {dir: message}}``; a bad
    run is reported and skipped.
    """
    result = {"runs": {}, "errors": {}}
    for d in run_dirs:
        try:
            summary = load_run(d)
        except (MetricsError, OSError) as exc:
            result["errors"][str(d)] = str(exc)
            continue
        target = Path(out_dir) / summary.name if out_dir else Path(d)
        target.mkdir(parents=True, exist_ok=True)
        for mode in summary.evals:
            _write(target / f"steps_{mode}.tsv", ["step", "total_steps", "resets", "success_rate", "smoothed"],
                   steps_table(summary, mode, smoothing))
        _write(target / "resets.tsv", ["resets", "step", "success_rate"], resets_table(summary))
        _write(target / "points.tsv", ["object_x", "object_y", "outcome"], summary.points)
        result["runs"][summary.name] = summary
    if out_dir and len(result["runs"]) > 1:
        runs = list(result["runs"].values())
        _write(Path(out_dir) / "resets_aligned.tsv", ["resets", *[r.name for r in runs]], align_on_resets(runs))
    return result
