"""Deterministic thread-pool mapping for replicate loops."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, Sequence


def ordered_map(fn: Callable, items: Sequence, threads: int = 1) -> list:
    """Apply ``fn`` over ``items``, results in input order.

    With ``threads`` <= 1 this is a plain loop. Thread count must never
    change results, only wall time; every worker gets self-contained
    inputs (own RNG stream) and aggregation follows the input index.
    """
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))
