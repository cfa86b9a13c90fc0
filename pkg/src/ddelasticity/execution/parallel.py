"""
Parallel execution engine for per-subdomain and per-face work.

Tasks are independent; results come back in input order so every reduction
over subdomains is deterministic regardless of the number of workers.
"""
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Generic, List, Sequence, TypeVar

from ..utils.logging import logger

T = TypeVar("T")
R = TypeVar("R")


@dataclass
class ParallelBatch(Generic[R]):
    """Results of one mapped batch."""
    results: List[R]
    durations: List[float] = field(default_factory=list)
    total_duration_seconds: float = 0.0

    @property
    def critical_path_seconds(self) -> float:
        """Longest single task, i.e. the batch time on an unlimited number of workers."""
        return max(self.durations, default=0.0)


class SubdomainExecutor:
    """
    Maps a function over independent subdomain (or face) tasks.

    With ``max_workers == 1`` tasks run inline; otherwise a thread pool is used.
    NumPy/SciPy kernels release the GIL, so subdomain solves overlap.
    """

    def __init__(self, max_workers: int = 1):
        """
        Initialize executor.

        Args:
            max_workers: Maximum number of parallel workers
        """
        if max_workers < 1:
            raise ValueError(f"max_workers must be >= 1, got {max_workers}")
        self.max_workers = max_workers
        self.logger = logger.getChild("parallel")
        self._pool = ThreadPoolExecutor(max_workers=max_workers) if max_workers > 1 else None

    def map(self, fn: Callable[[T], R], items: Sequence[T]) -> ParallelBatch[R]:
        """
        Apply ``fn`` to every item.

        Args:
            fn: Task function
            items: Task inputs

        Returns:
            ParallelBatch with results in input order and per-task wall times
        """
        start = time.perf_counter()

        def timed(item: T):
            t0 = time.perf_counter()
            out = fn(item)
            return out, time.perf_counter() - t0

        if self._pool is None or len(items) <= 1:
            pairs = [timed(item) for item in items]
        else:
            pairs = list(self._pool.map(timed, items))

        batch = ParallelBatch(
            results=[p[0] for p in pairs],
            durations=[p[1] for p in pairs],
            total_duration_seconds=time.perf_counter() - start,
        )
        self.logger.debug(
            f"Mapped {len(items)} tasks in {batch.total_duration_seconds:.4f}s "
            f"(critical path {batch.critical_path_seconds:.4f}s)"
        )
        return batch

    def shutdown(self) -> None:
        """Release worker threads."""
        if self._pool is not None:
            self._pool.shutdown(wait=True)
            self._pool = None

    def __enter__(self) -> "SubdomainExecutor":
        return self

    def __exit__(self, *exc) -> None:
        self.shutdown()


_default_executor = SubdomainExecutor(max_workers=1)


def get_default_executor() -> SubdomainExecutor:
    """Inline executor used when callers do not supply one."""
    return _default_executor
