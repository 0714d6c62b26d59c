"""Order-preserving map over worker processes."""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from functools import partial
from typing import Callable, Iterable


def parallel_map(fn: Callable, items: Iterable, jobs: int = 1) -> list:
    """``list(map(fn, items))``, optionally spread over ``jobs`` processes.

    Results come back in input order whatever the scheduling, so callers
    stay deterministic.
    """
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def mapper(jobs: int = 1) -> Callable:
    return partial(parallel_map, jobs=jobs)
