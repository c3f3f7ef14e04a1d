"""
trajlet.parallel

A thread-pool map whose result order never depends on the worker count.
numpy releases the GIL inside its kernels, so threads are enough for the
embarrassingly parallel loops (bank embedding, per-query evaluation,
similarity rows).

:author: trajlet contributors
:license: GNU General Public License v3
"""


import logging
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, Optional, TypeVar


__all__ = (
    'THREADS_ENV',
    'get_threads',
    'pmap',
    'set_threads',
)


logger = logging.getLogger(__name__)


THREADS_ENV = 'TRAJLET_THREADS'

A = TypeVar('A')
R = TypeVar('R')


_threads: Optional[int] = None


def set_threads(count: Optional[int]) -> None:
    """
    Cap the worker count for every later :func:`pmap`. ``None`` restores the
    default taken from ``TRAJLET_THREADS`` (or 1).
    """

    global _threads
    if count is not None and count < 1:
        raise ValueError(f"thread count must be at least 1, got {count}")
    _threads = count


def get_threads() -> int:
    if _threads is not None:
        return _threads

    env = os.environ.get(THREADS_ENV, '').strip()
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            logger.warning(f"Ignoring bad {THREADS_ENV} value: {env!r}")
    return 1


def pmap(
        func: Callable[[A], R],
        items: Iterable[A],
        threads: Optional[int] = None) -> List[R]:
    """
    ``list(map(func, items))``, spread over up to ``threads`` workers. The
    first exception raised by any call propagates, the results keep the
    order of ``items``.
    """

    work = list(items)
    if threads is None:
        threads = get_threads()

    if threads <= 1 or len(work) <= 1:
        return [func(item) for item in work]

    logger.debug(f"pmap over {len(work)} items with {threads} threads")
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(func, work))


# The end.
