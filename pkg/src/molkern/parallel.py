"""Deterministic work-queue helper.

Grid points in an experiment (rows of a Gram matrix, properties,
truncation levels, trials) are independent jobs.  ``parallel_map``
fans them out over a thread pool but always returns results in input
order, so reductions downstream are reproducible regardless of the
worker count.  Threads are the right pool here: the heavy lifting
happens inside numpy/scipy calls that release the GIL.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, Sequence, TypeVar

T = TypeVar("T")
R = TypeVar("R")


def default_jobs() -> int:
    return os.cpu_count() or 1


def parallel_map(fn: Callable[[T], R], items: Sequence[T] | Iterable[T], jobs: int | None = None) -> list[R]:
    """Apply ``fn`` to every item, preserving input order in the result."""
    items = list(items)
    jobs = default_jobs() if jobs is None else int(jobs)
    if jobs <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=min(jobs, len(items))) as pool:
        return list(pool.map(fn, items))
