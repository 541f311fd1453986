"""Fixed-size work chunks and an order-preserving worker pool.

Monte Carlo work is cut into chunks whose boundaries depend only on the
total size, never on the worker count. Each chunk draws from its own
substream and results are reduced in chunk order, which is what makes
the outputs identical for any ``workers`` value.
"""

import logging
from collections.abc import Callable, Sequence
from concurrent.futures import ProcessPoolExecutor
from typing import TypeVar

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")

DEFAULT_CHUNK_SIZE = 65_536


def chunk_sizes(total: int, chunk_size: int = DEFAULT_CHUNK_SIZE) -> list[int]:
    """Split ``total`` items into full chunks plus one remainder chunk."""
    if total <= 0:
        return []
    full, rest = divmod(total, chunk_size)
    return [chunk_size] * full + ([rest] if rest else [])


def map_ordered(func: Callable[[T], R], tasks: Sequence[T], workers: int = 1) -> list[R]:
    """Apply ``func`` to every task, in parallel when ``workers > 1``.

    ``func`` and the tasks must be picklable (module-level function,
    plain-data arguments) for the process pool.
    """
    if workers <= 1 or len(tasks) <= 1:
        return [func(task) for task in tasks]
    workers = min(workers, len(tasks))
    logger.debug("Dispatching %d tasks to %d worker processes", len(tasks), workers)
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, tasks))


__all__ = ["DEFAULT_CHUNK_SIZE", "chunk_sizes", "map_ordered"]
