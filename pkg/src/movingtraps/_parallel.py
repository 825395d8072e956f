"""Order-preserving parallel map.

Work items carry their own stream keys, so results never depend on how they
are scheduled; only the number of workers changes.
"""

from __future__ import annotations

import os
from collections.abc import Callable, Iterable
from concurrent.futures import ThreadPoolExecutor
from typing import TypeVar

T = TypeVar("T")
R = TypeVar("R")

_default_threads: int | None = None


def set_default_threads(n: int | None) -> None:
    global _default_threads
    if n is not None and n < 1:
        raise ValueError("thread count must be >= 1")
    _default_threads = n


def resolve_threads(n: int | None = None) -> int:
    if n is not None:
        return max(1, int(n))
    if _default_threads is not None:
        return _default_threads
    return os.cpu_count() or 1


def pmap(fn: Callable[[T], R], items: Iterable[T], threads: int | None = None) -> list[R]:
    items = list(items)
    n = min(resolve_threads(threads), len(items))
    if n <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=n) as ex:
        return list(ex.map(fn, items))
