"""Thread fan-out capped by ``PULSEFORGE_THREADS``; results keep input order."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, TypeVar

T = TypeVar("T")
R = TypeVar("R")


def thread_count() -> int:
    raw = os.environ.get("PULSEFORGE_THREADS", "")
    try:
        n = int(raw)
    except ValueError:
        n = 1
    return max(n, 1)


def pmap(fn: Callable[[T], R], items: Iterable[T]) -> List[R]:
    items = list(items)
    n = min(thread_count(), len(items))
    if n <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))
