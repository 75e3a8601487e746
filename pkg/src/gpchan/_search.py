"""Shared search utilities: simplex grids, deterministic parallel mapping,
and deadline bookkeeping."""

from __future__ import annotations

import itertools
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np


def simplex_grid(k: int, step: float) -> np.ndarray:
    """All points of the k-simplex with coordinates that are multiples of
    (approximately) step, in lexicographic order. step=0.1 on k=2 gives the
    11 points (0,1), (0.1,0.9), ..., (1,0)."""
    if not 0 < step <= 0.5:
        raise ValueError("simplex grid step must lie in (0, 0.5]")
    n = max(1, round(1.0 / step))
    out = []
    for cuts in itertools.combinations(range(n + k - 1), k - 1):
        prev = -1
        counts = []
        for c in cuts:
            counts.append(c - prev - 1)
            prev = c
        counts.append(n + k - 2 - prev)
        out.append(counts)
    return np.asarray(out, dtype=np.float64) / n


def local_simplex_grid(center: np.ndarray, coarse_step: float, refine: int = 5) -> np.ndarray:
    """Simplex points at resolution coarse_step/refine within one coarse step
    of center (per-coordinate), center's own point included."""
    k = center.size
    n_fine = max(1, round(1.0 / coarse_step)) * refine
    base = np.rint(center * n_fine).astype(np.int64)
    # repair rounding so the counts sum to n_fine
    diff = n_fine - int(base.sum())
    base[int(np.argmax(center))] += diff
    lo = np.maximum(base - refine, 0)
    hi = np.minimum(base + refine, n_fine)
    ranges = [range(int(lo[i]), int(hi[i]) + 1) for i in range(k - 1)]
    out = []
    for head in itertools.product(*ranges):
        rest = n_fine - sum(head)
        if lo[k - 1] <= rest <= hi[k - 1]:
            out.append(list(head) + [rest])
    return np.asarray(out, dtype=np.float64) / n_fine


def map_ordered(fn, items, workers: int):
    """Apply fn to items, in parallel when workers > 1, preserving order so
    reductions are independent of the worker count."""
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items))


class Deadline:
    """Wall-clock budget; None means unlimited."""

    def __init__(self, budget_seconds: float | None):
        self._end = None if budget_seconds is None else time.monotonic() + budget_seconds

    def exceeded(self) -> bool:
        return self._end is not None and time.monotonic() > self._end


def rng_for(seed: int, *tags: int) -> np.random.Generator:
    """Deterministic substream keyed by (seed, tags); independent of worker
    scheduling."""
    return np.random.default_rng(np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, *map(int, tags)]))
