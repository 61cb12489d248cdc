# multilayer_onn/utils/parallel.py
# Purpose: Ray batching and the thread pool shared by the Monte Carlo stages

"""
Module: parallel.py
Purpose: Split a ray budget into batches and run per-batch tasks on a thread pool. Each task
derives its own random stream, so results do not depend on the number of threads.
"""

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Optional, Sequence, TypeVar

T = TypeVar("T")
R = TypeVar("R")


def batch_sizes(rays: int, batch_size: int) -> List[int]:
    """Full batches of batch_size followed by the remainder, if any."""
    full, rest = divmod(rays, batch_size)
    return [batch_size] * full + ([rest] if rest else [])


def run_tasks(fn: Callable[[T], R], tasks: Sequence[T], threads: Optional[int]) -> List[R]:
    """
    Apply fn to every task, in order.

    Args:
        fn (Callable): Task body.
        tasks (Sequence): Task descriptors.
        threads (Optional[int]): Worker threads; None or 1 runs inline.

    Returns:
        List: Results in task order.
    """
    if threads is None or threads <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, tasks))
