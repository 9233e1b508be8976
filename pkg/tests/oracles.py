"""Independent reference implementations used only by the tests."""

from __future__ import annotations

import itertools
import math

import numpy as np


def monotone_alignments(n: int, m: int):
    """Every warping path from (0, 0) to (n-1, m-1) with unit steps right/down/diagonal."""
    def walk(i, j, path):
        if (i, j) == (n - 1, m - 1):
            yield path
            return
        if i + 1 < n:
            yield from walk(i + 1, j, path + [(i + 1, j)])
        if j + 1 < m:
            yield from walk(i, j + 1, path + [(i, j + 1)])
        if i + 1 < n and j + 1 < m:
            yield from walk(i + 1, j + 1, path + [(i + 1, j + 1)])

    yield from walk(0, 0, [(0, 0)])


def dtw_enumerate(a, b) -> float:
    """Minimum over all monotone alignments, costs summed along the path in order."""
    a = np.atleast_2d(np.asarray(a, dtype=np.float64).reshape(len(a), -1))
    b = np.atleast_2d(np.asarray(b, dtype=np.float64).reshape(len(b), -1))
    cost = np.sqrt(((a[:, None, :] - b[None, :, :]) ** 2).sum(axis=-1)).tolist()
    best = math.inf
    for path in monotone_alignments(len(a), len(b)):
        total = 0.0
        for i, j in path:
            total = total + cost[i][j]
        best = min(best, total)
    return best


def dtw_branch_and_bound(a, b) -> float:
    """Depth-first search over every monotone alignment, skipping a prefix only when it provably cannot win.

    The bound on the unpaid part is admissible: every later row and every
    later column must still be visited, at no less than its cheapest
    reachable cell. It is shrunk by a relative 1e-9 so float rounding can
    never discard the optimum, and path sums are accumulated in path order
    exactly as in ``dtw_enumerate``. Fast enough for lengths up to 12.
    """
    a = np.asarray(a, dtype=np.float64).reshape(len(a), -1)
    b = np.asarray(b, dtype=np.float64).reshape(len(b), -1)
    n, m = len(a), len(b)
    c = np.sqrt(((a[:, None, :] - b[None, :, :]) ** 2).sum(axis=-1))
    cost = c.tolist()
    row_min = np.minimum.accumulate(c[:, ::-1], axis=1)[:, ::-1]
    col_min = np.minimum.accumulate(c[::-1, :], axis=0)[::-1, :]
    lb = np.zeros((n, m))
    for i in range(n):
        for j in range(m):
            rows = row_min[i + 1:, j].sum() if i + 1 < n else 0.0
            cols = col_min[i, j + 1:].sum() if j + 1 < m else 0.0
            lb[i, j] = max(rows, cols)
    lb = (lb * (1 - 1e-9)).tolist()
    best = math.inf
    stack = [(0, 0, cost[0][0])]
    while stack:
        i, j, total = stack.pop()
        if total + lb[i][j] > best:
            continue
        if i == n - 1 and j == m - 1:
            best = min(best, total)
            continue
        for di, dj in ((1, 0), (0, 1), (1, 1)):  # diagonal pushed last, explored first
            ii, jj = i + di, j + dj
            if ii < n and jj < m:
                stack.append((ii, jj, total + cost[ii][jj]))
    return best


def dtw_memo(a, b) -> float:
    """Top-down memoized DTW, a second oracle usable on longer sequences."""
    import functools

    a = np.asarray(a, dtype=np.float64).reshape(len(a), -1)
    b = np.asarray(b, dtype=np.float64).reshape(len(b), -1)

    @functools.lru_cache(maxsize=None)
    def d(i, j):
        c = float(np.linalg.norm(a[i] - b[j]))
        if i == 0 and j == 0:
            return c
        opts = []
        if i > 0:
            opts.append(d(i - 1, j))
        if j > 0:
            opts.append(d(i, j - 1))
        if i > 0 and j > 0:
            opts.append(d(i - 1, j - 1))
        return min(opts) + c

    return d(len(a) - 1, len(b) - 1)


def gae_reference(rewards, values, next_values, terminals, boundaries, gamma, tau):
    """Per-element backward recursion written with plain Python loops."""
    T = len(rewards)
    adv = [0.0] * T
    running = 0.0
    for t in reversed(range(T)):
        boot = 0.0 if terminals[t] else next_values[t]
        delta = rewards[t] + gamma * boot - values[t]
        running = delta + (0.0 if boundaries[t] else gamma * tau * running)
        adv[t] = running
    return np.array(adv), np.array(adv) + np.asarray(values)


def central_differences(f, x, eps=1e-5):
    x = np.array(x, dtype=np.float64)
    grad = np.zeros_like(x)
    for k in range(x.size):
        old = x[k]
        x[k] = old + eps
        up = f(x)
        x[k] = old - eps
        down = f(x)
        x[k] = old
        grad[k] = (up - down) / (2 * eps)
    return grad


def scan_min_distances(tau, window, horizon):
    """Loop-by-loop transcription of the sliding-window max-min distance."""
    tau = np.asarray(tau, dtype=np.float64)
    n, m = horizon, window
    distances = []
    for i in range(m):
        s = tau[n - m + i]
        past = tau[: n - 2 * m + i]
        distances.append(min(float(np.linalg.norm(s - p)) for p in past))
    return max(distances)


def entropy_from_counts(counts) -> float:
    counts = np.asarray(counts, dtype=np.float64)
    p = counts[counts > 0] / counts.sum()
    return float(-(p * np.log(p)).sum())


def partitions(n: int):
    for mask in itertools.product((False, True), repeat=n - 1):
        yield [0] + [i + 1 for i, c in enumerate(mask) if c] + [n]
