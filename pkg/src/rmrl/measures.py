"""Trajectory diversity measures and the online near-irreversibility detectors.

Two families are provided. Dispersion measures (``std_dispersion``,
``entropy_dispersion``) summarise how spread out a horizon of states is;
distance measures (pointwise L2 and DTW) ask how far the most recent states
are from everything seen before them. Low values of either mean the agent is
no longer changing the world much, which is the signature of a stuck object.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .trajectory import TrajectoryBuffer


class MeasureKind(str, enum.Enum):
    STD = "std"
    ENT = "ent"
    L2 = "l2"
    DTW = "dtw"

    @property
    def is_dispersion(self) -> bool:
        return self in (MeasureKind.STD, MeasureKind.ENT)


_DEFAULT_HORIZON = {MeasureKind.STD: 300, MeasureKind.ENT: 300, MeasureKind.L2: 600, MeasureKind.DTW: 600}


@dataclass
class MeasureConfig:
    kind: MeasureKind = MeasureKind.STD
    horizon: Optional[int] = None
    window: int = 100
    threshold: float = 0.01
    n_tol: int = 2
    bins_per_dim: int = 16
    bounds: tuple = ((0.0, 1.0), (0.0, 1.0))

    def __post_init__(self):
        self.kind = MeasureKind(self.kind)
        if self.horizon is None:
            self.horizon = _DEFAULT_HORIZON[self.kind]
        self.bounds = tuple(tuple(float(v) for v in b) for b in self.bounds)
        if self.horizon < 1:
            raise ValueError("horizon must be positive")
        if self.threshold < 0:
            raise ValueError("threshold must be non-negative")
        if self.n_tol < 1:
            raise ValueError("n_tol must be at least 1")
        if self.bins_per_dim < 1:
            raise ValueError("bins_per_dim must be at least 1")
        if not self.kind.is_dispersion and not (1 <= self.window and 2 * self.window < self.horizon):
            raise ValueError(f"window {self.window} must satisfy 2*window < horizon {self.horizon}")


@dataclass(frozen=True)
class MeasureVerdict:
    """Outcome of one detector update; ``value`` is None when no check ran."""

    value: Optional[float]
    ni: bool
    checked_at_step: Optional[int] = None

    @property
    def checked(self) -> bool:
        return self.value is not None


NO_CHECK = MeasureVerdict(None, False, None)


def _as_array(states) -> np.ndarray:
    arr = np.asarray(states, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None] if arr.size else arr.reshape(0, 1)
    if arr.shape[0] == 0:
        raise ValueError("empty state sequence")
    return arr


def std_dispersion(states) -> float:
    """Mean over coordinates of the population standard deviation."""
    arr = _as_array(states)
    # Centre on the first state so that a frozen window gives exactly zero.
    return float(np.mean(np.std(arr - arr[0], axis=0)))


def cell_ids(states, bins_per_dim: int, bounds) -> np.ndarray:
    """Joint grid cell index of every state (equal-width bins, clamped to the edges)."""
    arr = _as_array(states)
    lo = np.array([b[0] for b in bounds], dtype=np.float64)
    hi = np.array([b[1] for b in bounds], dtype=np.float64)
    if lo.shape[0] != arr.shape[1]:
        raise ValueError("bounds do not match state dimension")
    idx = np.floor((arr - lo) / (hi - lo) * bins_per_dim).astype(np.int64)
    idx = np.clip(idx, 0, bins_per_dim - 1)
    return np.ravel_multi_index(idx.T, (bins_per_dim,) * arr.shape[1])


def entropy_dispersion(states, bins_per_dim: int = 16, bounds=((0.0, 1.0), (0.0, 1.0))) -> float:
    """Shannon entropy (nats) of the empirical grid-cell occupancy."""
    ids = cell_ids(states, bins_per_dim, bounds)
    _, counts = np.unique(ids, return_counts=True)
    p = counts / counts.sum()
    return float(max(0.0, -np.sum(p * np.log(p))))


def dtw_distance(a, b) -> float:
    """Classic DTW with Euclidean local cost and steps (1,0), (0,1), (1,1)."""
    a = _as_array(a)
    b = _as_array(b)
    cost = np.sqrt(((a[:, None, :] - b[None, :, :]) ** 2).sum(axis=-1)).tolist()
    n, m = len(cost), len(cost[0])
    prev = [math.inf] * m
    for i in range(n):
        row = cost[i]
        cur = [0.0] * m
        for j in range(m):
            if i == 0 and j == 0:
                best = 0.0
            else:
                best = prev[j]
                if j > 0:
                    if prev[j - 1] < best:
                        best = prev[j - 1]
                    if cur[j - 1] < best:
                        best = cur[j - 1]
            cur[j] = best + row[j]
        prev = cur
    return float(prev[-1])


def dispersion(states, cfg: MeasureConfig) -> float:
    if cfg.kind is MeasureKind.STD:
        return std_dispersion(states)
    if cfg.kind is MeasureKind.ENT:
        return entropy_dispersion(states, cfg.bins_per_dim, cfg.bounds)
    raise ValueError(f"{cfg.kind.value} is not a dispersion measure")


@dataclass
class CounterState:
    """Consecutive low-diversity check count for one worker."""

    n_irr: int = 0


def dispersion_decision(
    buffer: TrajectoryBuffer, cfg: MeasureConfig, counter: CounterState, step: Optional[int] = None
) -> MeasureVerdict:
    """Consecutive-check dispersion detector.

    Once the buffer holds ``cfg.horizon`` states the dispersion is computed and
    the buffer cleared. ``n_tol`` consecutive checks below the threshold
    declare NI and zero the counter.
    """
    if not cfg.kind.is_dispersion:
        raise ValueError(f"dispersion_decision needs std or ent, got {cfg.kind.value}")
    if len(buffer) < cfg.horizon:
        return NO_CHECK
    rho = dispersion(buffer.window(cfg.horizon), cfg)
    ni = False
    if rho < cfg.threshold:
        counter.n_irr += 1
        if counter.n_irr >= cfg.n_tol:
            ni = True
            counter.n_irr = 0
    else:
        counter.n_irr = 0
    if step is None and len(buffer):
        step = int(buffer.steps()[-1])
    buffer.clear()
    return MeasureVerdict(rho, ni, step)


def max_min_distance(states, window: int, horizon: int, kind: MeasureKind = MeasureKind.L2) -> float:
    """Largest distance from any of the last ``window`` states to its sliding past."""
    tau = _as_array(states)[-horizon:]
    if tau.shape[0] < horizon:
        raise ValueError("need a full horizon of states")
    n, m = horizon, window
    if kind is MeasureKind.DTW:
        return dtw_distance(tau[n - m :], tau[: n - 2 * m]) / m
    recent = tau[n - m :]
    past = tau[: n - m]
    dist = np.sqrt(((recent[:, None, :] - past[None, :, :]) ** 2).sum(axis=-1))
    # recent state i may only look at past[: n - 2m + i]
    limit = n - 2 * m + np.arange(m)
    dist[np.arange(n - m)[None, :] >= limit[:, None]] = np.inf
    return float(dist.min(axis=1).max())


def distance_decision(buffer: TrajectoryBuffer, cfg: MeasureConfig, step: Optional[int] = None) -> MeasureVerdict:
    """Sliding-window distance detector; checks and clears every ``horizon`` states."""
    if cfg.kind.is_dispersion:
        raise ValueError(f"distance_decision needs l2 or dtw, got {cfg.kind.value}")
    if len(buffer) < cfg.horizon:
        return NO_CHECK
    value = max_min_distance(buffer.window(cfg.horizon), cfg.window, cfg.horizon, cfg.kind)
    if step is None:
        step = int(buffer.steps()[-1])
    buffer.clear()
    return MeasureVerdict(value, value < cfg.threshold, step)


@dataclass
class Detector:
    """Per-worker detector: owns the buffer and counter for one environment."""

    cfg: MeasureConfig
    buffer: TrajectoryBuffer = field(default=None)
    counter: CounterState = field(default_factory=CounterState)

    def __post_init__(self):
        if self.buffer is None:
            self.buffer = TrajectoryBuffer(capacity=self.cfg.horizon)

    def update(self, state, step: int) -> MeasureVerdict:
        self.buffer.append(state, step)
        if self.cfg.kind.is_dispersion:
            return dispersion_decision(self.buffer, self.cfg, self.counter, step)
        return distance_decision(self.buffer, self.cfg, step)

    def reset(self) -> None:
        self.buffer.clear()
        self.counter.n_irr = 0


def run_detector(states, cfg: MeasureConfig) -> list[MeasureVerdict]:
    """Feed a whole trajectory through a fresh detector; returns the checked verdicts."""
    det = Detector(cfg)
    out = []
    for t, s in enumerate(_as_array(states)):
        v = det.update(s, t + 1)
        if v.checked:
            out.append(v)
    return out


# ---------------------------------------------------------------------------
# Partition counting over low-diversity blocks


@dataclass
class PartitionCountConfig:
    block_width: int = 5
    count_threshold: int = 1
    alpha: float = 0.1
    metric: MeasureKind = MeasureKind.STD
    bins_per_dim: int = 16
    bounds: tuple = ((0.0, 1.0), (0.0, 1.0))

    def __post_init__(self):
        self.metric = MeasureKind(self.metric)
        if not self.metric.is_dispersion:
            raise ValueError("partition counting uses std or ent")
        if self.block_width < 2:
            raise ValueError("block_width must be at least 2")
        if self.count_threshold < 1:
            raise ValueError("count_threshold must be at least 1")
        if self.alpha < 0:
            raise ValueError("alpha must be non-negative")

    def diversity(self) -> Callable[[np.ndarray], float]:
        if self.metric is MeasureKind.STD:
            return std_dispersion
        return lambda s: entropy_dispersion(s, self.bins_per_dim, self.bounds)


def _is_quiet_block(traj: np.ndarray, lo: int, hi: int, cfg: PartitionCountConfig, d) -> bool:
    return hi - lo >= cfg.block_width and d(traj[lo:hi]) < cfg.alpha


def phi_count(trajectory, cfg: PartitionCountConfig) -> int:
    """Maximum number of disjoint contiguous blocks of width >= W with diversity < alpha.

    Left-to-right greedy that always closes the qualifying block with the
    earliest right end. Gaps between chosen blocks become non-counting blocks
    of the partition, so this is the classic earliest-finish interval
    schedule and is optimal for any diversity function.
    """
    traj = _as_array(trajectory)
    d = cfg.diversity()
    n = traj.shape[0]
    count = 0
    start = 0
    end = start + cfg.block_width
    while end <= n:
        hit = any(
            _is_quiet_block(traj, lo, end, cfg, d) for lo in range(end - cfg.block_width, start - 1, -1)
        )
        if hit:
            count += 1
            start = end
            end = start + cfg.block_width
        else:
            end += 1
    return count


def phi_count_exhaustive(trajectory, cfg: PartitionCountConfig) -> int:
    """Brute force over all 2^(t-1) partitions. Only for short trajectories."""
    traj = _as_array(trajectory)
    n = traj.shape[0]
    if n > 20:
        raise ValueError("exhaustive partition count is limited to 20 states")
    d = cfg.diversity()
    best = 0
    for mask in itertools.product((False, True), repeat=n - 1):
        cuts = [0] + [i + 1 for i, c in enumerate(mask) if c] + [n]
        total = sum(_is_quiet_block(traj, lo, hi, cfg, d) for lo, hi in zip(cuts, cuts[1:]))
        best = max(best, total)
    return best


def phi_decision(trajectory, cfg: PartitionCountConfig, count_threshold: Optional[int] = None) -> bool:
    threshold = cfg.count_threshold if count_threshold is None else count_threshold
    return phi_count(trajectory, cfg) >= threshold
