"""Thread-count control and deterministic chunked mapping."""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence, TypeVar

T = TypeVar("T")
R = TypeVar("R")

ENV_VAR = "FRACPROP_THREADS"


def thread_count() -> int:
    """Worker count from ``FRACPROP_THREADS`` (default 1, never below 1)."""
    raw = os.environ.get(ENV_VAR, "").strip()
    if not raw:
        return 1
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def ordered_map(fn: Callable[[T], R], items: Sequence[T]) -> list[R]:
    """Map ``fn`` over ``items``; results come back in input order.

    Runs serially unless more than one thread is allowed.
    """
    n = thread_count()
    if n == 1 or len(items) < 2:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=min(n, len(items))) as pool:
        return list(pool.map(fn, items))


def chunk_bounds(size: int, n_chunks: int) -> list[tuple[int, int]]:
    n_chunks = max(1, min(n_chunks, size))
    step = -(-size // n_chunks)
    return [(lo, min(lo + step, size)) for lo in range(0, size, step)]
