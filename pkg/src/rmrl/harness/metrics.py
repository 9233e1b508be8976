"""Line-delimited JSON metrics: one record per line, append-only."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Iterator

KINDS = ("reward", "success", "reset", "measure", "eval")


class MetricsError(ValueError):
    pass


class MetricsWriter:
    """Single writer for all workers; records of each worker must come in step order."""

    def __init__(self, path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._fh = open(self.path, "w", encoding="utf-8")
        self._last: dict[int, int] = {}

    def write(self, step: int, worker: int, kind: str, **payload) -> None:
        if kind not in KINDS:
            raise MetricsError(f"unknown record kind {kind!r}")
        if step < self._last.get(worker, -1):
            raise MetricsError(f"worker {worker} step went backwards: {step} < {self._last[worker]}")
        self._last[worker] = step
        rec = {"step": int(step), "worker": int(worker), "kind": kind, **payload}
        self._fh.write(json.dumps(rec, separators=(",", ":")) + "\n")

    def flush(self) -> None:
        self._fh.flush()

    def close(self) -> None:
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_metrics(path) -> Iterator[dict]:
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MetricsError(f"{path}:{lineno}: corrupt record ({exc.msg})") from exc
            if not isinstance(rec, dict) or rec.get("kind") not in KINDS or "step" not in rec:
                raise MetricsError(f"{path}:{lineno}: malformed record")
            yield rec
