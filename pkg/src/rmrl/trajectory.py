"""State vectors, the bounded trajectory history, and phase / reset records."""

from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np


def as_state(values, dim: Optional[int] = None) -> np.ndarray:
    """Validate and copy a state vector as a 1-D float64 array."""
    s = np.array(values, dtype=np.float64).reshape(-1)
    if dim is not None and s.shape[0] != dim:
        raise ValueError(f"state has dimension {s.shape[0]}, expected {dim}")
    if not np.all(np.isfinite(s)):
        raise ValueError("state contains non-finite entries")
    return s


class TrajectoryBuffer:
    """Fixed-capacity, oldest-first-evicting window of recent states.

    Every entry carries the step index at which it was recorded; step indices
    must be strictly increasing. ``phase_starts`` keeps the step indices of
    phase boundaries that still fall inside the window.
    """

    def __init__(self, capacity: int = 600, dim: Optional[int] = None):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = int(capacity)
        self.dim = dim
        self._states: deque[np.ndarray] = deque(maxlen=self.capacity)
        self._steps: deque[int] = deque(maxlen=self.capacity)
        self.phase_starts: list[int] = []

    def __len__(self) -> int:
        return len(self._states)

    def append(self, s, step: Optional[int] = None) -> "TrajectoryBuffer":
        s = as_state(s, self.dim)
        if self.dim is None:
            self.dim = s.shape[0]
        if step is None:
            step = self._steps[-1] + 1 if self._steps else 0
        step = int(step)
        if self._steps and step <= self._steps[-1]:
            raise ValueError(f"step {step} not after last step {self._steps[-1]}")
        self._states.append(s)
        self._steps.append(step)
        if self.phase_starts and self.phase_starts[0] < self._steps[0]:
            self.phase_starts = [p for p in self.phase_starts if p >= self._steps[0]]
        return self

    def mark_phase_start(self, step: int) -> None:
        self.phase_starts.append(int(step))

    def window(self, k: int) -> list[np.ndarray]:
        """Most recent ``k`` states, oldest first."""
        if k < 1 or k > len(self):
            raise ValueError(f"window of {k} requested from buffer of length {len(self)}")
        return [s.copy() for s in list(self._states)[len(self) - k :]]

    def states(self) -> np.ndarray:
        if not self._states:
            return np.empty((0, self.dim or 0))
        return np.stack(self._states)

    def steps(self) -> np.ndarray:
        return np.fromiter(self._steps, dtype=np.int64, count=len(self._steps))

    def clear(self) -> "TrajectoryBuffer":
        self._states.clear()
        self._steps.clear()
        self.phase_starts = []
        return self

    def to_table(self) -> str:
        """Plain-text table ``step dim0 .. dimD-1`` with one header line."""
        d = self.dim or 0
        lines = ["step\t" + "\t".join(f"dim{i}" for i in range(d))]
        for t, s in zip(self._steps, self._states):
            lines.append(f"{t}\t" + "\t".join(repr(float(v)) for v in s))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_table(cls, text: str, capacity: int = 600) -> "TrajectoryBuffer":
        rows = [ln.split("\t") for ln in text.strip().splitlines()[1:]]
        buf = cls(capacity=capacity, dim=len(rows[0]) - 1 if rows else None)
        for row in rows:
            buf.append([float(v) for v in row[1:]], step=int(row[0]))
        return buf


class PhaseOutcome(str, enum.Enum):
    SUCCESS = "success"
    TIMEOUT = "timeout"
    INTERRUPTED = "interrupted"


class ResetCause(str, enum.Enum):
    INITIAL = "initial"
    PERIODIC = "periodic"
    MEASURE_NI = "measure_ni"
    GROUND_TRUTH = "ground_truth_irreversible"
    EPISODIC = "episodic_boundary"


@dataclass
class PhaseRecord:
    phase_index: int
    goal: tuple
    start_step: int
    end_step: Optional[int] = None
    outcome: Optional[PhaseOutcome] = None
    direction: Optional[str] = None

    @property
    def length(self) -> int:
        if self.end_step is None:
            raise ValueError("phase still open")
        return self.end_step - self.start_step

    def close(self, end_step: int, outcome: PhaseOutcome) -> "PhaseRecord":
        if end_step < self.start_step:
            raise ValueError("phase cannot end before it starts")
        self.end_step = int(end_step)
        self.outcome = PhaseOutcome(outcome)
        return self


@dataclass(frozen=True)
class ResetEvent:
    step: int
    worker: int
    cause: ResetCause


@dataclass
class ResetLog:
    """Every reset of one experiment, in emission order."""

    events: list[ResetEvent] = field(default_factory=list)

    def add(self, step: int, worker: int, cause: ResetCause) -> ResetEvent:
        ev = ResetEvent(int(step), int(worker), ResetCause(cause))
        self.events.append(ev)
        return ev

    def __len__(self) -> int:
        return len(self.events)

    def count(self, cause: Optional[ResetCause] = None, worker: Optional[int] = None) -> int:
        return sum(
            1
            for e in self.events
            if (cause is None or e.cause == cause) and (worker is None or e.worker == worker)
        )


def phases_partition(records: Sequence[PhaseRecord]) -> bool:
    """True if closed phase records tile the step axis with no gaps or overlaps."""
    closed = [r for r in records if r.end_step is not None]
    return all(a.end_step == b.start_step for a, b in zip(closed, closed[1:]))

