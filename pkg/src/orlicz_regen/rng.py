"""Counter-based random streams and the worker pool used for replica parallelism.

A stream is identified by ``(seed, *key)``; the same identifier always yields
the same numbers, whichever worker draws them, so parallel runs are
reproducible bit for bit.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, TypeVar

import numpy as np

T = TypeVar("T")
R = TypeVar("R")

WORKERS_ENV = "ORLICZ_REGEN_WORKERS"


def stream(seed: int, *key: int) -> np.random.Generator:
    """Independent Philox generator for the stream ``(seed, *key)``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def resolve_workers(workers: int | None = None) -> int:
    """Explicit value, else the environment variable, else 1."""
    if workers is None:
        env = os.environ.get(WORKERS_ENV, "").strip()
        workers = int(env) if env else 1
    return max(1, int(workers))


def parallel_map(fn: Callable[[T], R], items: Iterable[T], workers: int | None = None) -> list[R]:
    """``[fn(x) for x in items]`` on a thread pool; results keep the input order."""
    items = list(items)
    n = resolve_workers(workers)
    if n == 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


def chunked(n: int, size: int) -> list[tuple[int, int]]:
    """``(chunk_index, count)`` pairs covering ``n`` items in fixed-size chunks."""
    return [(i, min(size, n - i * size)) for i in range((n + size - 1) // size)]
