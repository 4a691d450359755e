"""Deterministic chunked execution.

Monte Carlo work is split into chunks of a fixed size. Chunk ``c`` draws
from its own stream, seeded from ``SeedSequence(seed, spawn_key=(*tag, c))``,
and results are concatenated in chunk order. The merged output is therefore
identical for any number of worker threads.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence, TypeVar

import numpy as np

T = TypeVar("T")

#: Samples per chunk for Kac-Rice estimators.
CHUNK_SIZE = 65536


def rng(seed: int, *key: int) -> np.random.Generator:
    """Return the generator for stream ``key`` of ``seed``."""
    if seed is None:
        raise TypeError("an explicit integer seed is required")
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))


def chunk_bounds(n: int, size: int = CHUNK_SIZE) -> list[tuple[int, int]]:
    """Split ``range(n)`` into consecutive ``(start, stop)`` pairs."""
    return [(lo, min(lo + size, n)) for lo in range(0, n, size)]


def default_workers() -> int:
    """Worker count from ``PEAKHEIGHT_WORKERS`` (default 1)."""
    try:
        return max(1, int(os.environ.get("PEAKHEIGHT_WORKERS", "1")))
    except ValueError:
        return 1


def map_ordered(fn: Callable[[T], object], items: Sequence[T], workers: int | None = None) -> list:
    """Apply ``fn`` to each item, possibly in threads, keeping input order."""
    workers = default_workers() if workers is None else max(1, int(workers))
    if workers == 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
