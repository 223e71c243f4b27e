import os
from concurrent.futures import ProcessPoolExecutor
from logging import getLogger
from typing import Callable, List, Optional, Sequence, TypeVar

from cuegap.common import UserError

logger = getLogger(__name__)

THREADS_VARIABLE = "CUEGAP_THREADS"

T = TypeVar("T")
R = TypeVar("R")

_forced_workers: Optional[int] = None


def set_worker_count(count: Optional[int]) -> None:
    """Overrides the environment for the rest of the process (None restores it)."""
    global _forced_workers
    if count is not None and count < 1:
        raise UserError(f"Worker count must be positive, got {count}")
    _forced_workers = count


def worker_count() -> int:
    if _forced_workers is not None:
        return _forced_workers

    value = os.getenv(THREADS_VARIABLE)
    if value:
        try:
            count = int(value)
        except ValueError:
            raise UserError(f"{THREADS_VARIABLE} must be an integer, got {value!r}")
        if count < 1:
            raise UserError(f"{THREADS_VARIABLE} must be positive, got {count}")
        return count

    return os.cpu_count() or 1


def pmap(func: Callable[[T], R], items: Sequence[T], workers: Optional[int] = None) -> List[R]:
    """Order-preserving map. With a single worker (or item) everything stays in-process."""
    workers = workers or worker_count()
    if workers == 1 or len(items) <= 1:
        return [func(item) for item in items]

    workers = min(workers, len(items))
    logger.debug("Mapping %d items over %d processes", len(items), workers)
    with ProcessPoolExecutor(max_workers=workers) as executor:
        return list(executor.map(func, items))
