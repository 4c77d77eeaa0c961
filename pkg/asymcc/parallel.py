"""
Worker pool helpers.
"""

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, Optional, TypeVar

from .config import get_settings

T = TypeVar("T")
R = TypeVar("R")


def resolve_threads(threads: Optional[int] = None) -> int:
    """Flag, then CC_THREADS, then hardware parallelism."""
    if threads is not None and threads >= 1:
        return threads
    configured = get_settings().CC_THREADS
    if configured is not None:
        return configured
    return os.cpu_count() or 1


def thread_map(
    fn: Callable[[T], R], items: Iterable[T], threads: Optional[int] = None
) -> List[R]:
    """Map ``fn`` over ``items`` on a thread pool, preserving input order."""
    items = list(items)
    workers = min(resolve_threads(threads), max(len(items), 1))
    if workers <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as executor:
        return list(executor.map(fn, items))
