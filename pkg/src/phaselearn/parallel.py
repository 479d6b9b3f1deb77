"""Process-wide worker thread setting.

All parallel code paths partition work into fixed, contiguous pieces whose
results do not depend on how many workers process them, so changing the
thread count never changes numerical output.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence, TypeVar

T = TypeVar("T")

_threads = max(1, int(os.environ.get("PHASELEARN_THREADS", "1") or 1))
_pools: dict[int, ThreadPoolExecutor] = {}


def get_num_threads() -> int:
    return _threads


def set_num_threads(n: int) -> None:
    global _threads
    if n < 1:
        raise ValueError(f"thread count must be >= 1, got {n}")
    _threads = int(n)


class num_threads:
    """Context manager that temporarily changes the worker count."""

    def __init__(self, n: int):
        self.n = n
        self._old = None

    def __enter__(self):
        self._old = get_num_threads()
        set_num_threads(self.n)
        return self

    def __exit__(self, *exc):
        set_num_threads(self._old)


def _pool(n: int) -> ThreadPoolExecutor:
    pool = _pools.get(n)
    if pool is None:
        pool = _pools[n] = ThreadPoolExecutor(max_workers=n, thread_name_prefix="phaselearn")
    return pool


def split_range(total: int, parts: int) -> list[tuple[int, int]]:
    """Contiguous ``[lo, hi)`` ranges covering ``range(total)``."""
    parts = max(1, min(parts, total))
    step, extra = divmod(total, parts)
    out = []
    lo = 0
    for p in range(parts):
        hi = lo + step + (1 if p < extra else 0)
        out.append((lo, hi))
        lo = hi
    return out


def run_tasks(fn: Callable[..., T], args: Sequence[tuple], threads: int | None = None) -> list[T]:
    """Run ``fn(*a)`` for every ``a`` and return results in submission order."""
    threads = get_num_threads() if threads is None else threads
    if threads <= 1 or len(args) <= 1:
        return [fn(*a) for a in args]
    futures = [_pool(threads).submit(fn, *a) for a in args]
    return [f.result() for f in futures]
