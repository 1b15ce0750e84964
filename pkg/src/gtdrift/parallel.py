"""Replica orchestration: fixed blocks, a bounded thread pool, in-order merge.

The compiled simulators release the GIL, so threads give real concurrency.
Blocks are cut from the replica range independently of the worker count and
every replica seeds its own stream, hence the merged output is the same for
any number of workers.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable

import numpy as np

WORKERS_ENV = "GTDRIFT_WORKERS"
DEFAULT_BLOCK = 2048


def worker_count(requested: int | None = None) -> int:
    """Explicit request, else ``$GTDRIFT_WORKERS``, else the CPU count."""
    if requested is None:
        env = os.environ.get(WORKERS_ENV)
        requested = int(env) if env else (os.cpu_count() or 1)
    if requested < 1:
        raise ValueError("worker count must be >= 1")
    return int(requested)


def blocks(replicas: int, block: int = DEFAULT_BLOCK) -> list[tuple[int, int]]:
    """``(first, count)`` pairs covering ``0 .. replicas-1``."""
    if replicas < 0:
        raise ValueError("replicas must be >= 0")
    return [(s, min(block, replicas - s)) for s in range(0, replicas, block)]


def run_replicas(block_fn: Callable[[int, int], np.ndarray], replicas: int,
                 workers: int | None = None, block: int = DEFAULT_BLOCK) -> list:
    """Evaluate ``block_fn(first, count)`` over all blocks; results come back in block order."""
    jobs = blocks(replicas, block)
    w = min(worker_count(workers), max(1, len(jobs)))
    if w == 1:
        return [block_fn(f, c) for f, c in jobs]
    with ThreadPoolExecutor(max_workers=w) as pool:
        return list(pool.map(lambda job: block_fn(*job), jobs))


def run_stacked(block_fn: Callable[[int, int], np.ndarray], replicas: int, width: int,
                dtype=float, workers: int | None = None, block: int = DEFAULT_BLOCK) -> np.ndarray:
    """Like :func:`run_replicas` for array-valued blocks, stacked into ``(replicas, width)``."""
    parts = run_replicas(block_fn, replicas, workers, block)
    if not parts:
        return np.empty((0, width), dtype=dtype)
    return np.concatenate(parts, axis=0)
