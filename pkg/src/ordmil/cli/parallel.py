from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from typing import TYPE_CHECKING, Any

if TYPE_CHECKING:
    from collections.abc import Callable, Sequence


def run_jobs[T](func: Callable[..., T], jobs: Sequence[tuple[Any, ...]], workers: int) -> list[T]:
    """Run `func(*job)` for every job and return results in job order.

    With one worker (or one job) everything runs in this process.
    """
    if workers <= 1 or len(jobs) <= 1:
        return [func(*job) for job in jobs]

    with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as executor:
        futures = [executor.submit(func, *job) for job in jobs]
        return [future.result() for future in futures]
