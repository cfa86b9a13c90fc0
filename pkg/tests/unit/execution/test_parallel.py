"""
Unit tests for SubdomainExecutor.

Tests result ordering, timing records and worker-pool lifecycle.
"""
import threading
import time

import numpy as np
import pytest

from ddelasticity.execution.parallel import ParallelBatch, SubdomainExecutor, get_default_executor

pytestmark = pytest.mark.unit


@pytest.fixture
def pooled_executor():
    """Create a SubdomainExecutor with a thread pool."""
    executor = SubdomainExecutor(max_workers=3)
    yield executor
    executor.shutdown()


class TestSubdomainExecutorInit:
    """Test SubdomainExecutor initialization."""

    def test_init_default_workers(self):
        """Default executor runs inline."""
        executor = SubdomainExecutor()
        assert executor.max_workers == 1
        assert executor._pool is None

    def test_init_custom_workers(self, pooled_executor):
        """Test initialization with custom max_workers."""
        assert pooled_executor.max_workers == 3
        assert pooled_executor._pool is not None

    def test_init_rejects_zero_workers(self):
        with pytest.raises(ValueError):
            SubdomainExecutor(max_workers=0)

    def test_init_has_logger(self):
        """Test that logger is initialized."""
        assert hasattr(SubdomainExecutor(), "logger")

    def test_default_executor_is_shared(self):
        assert get_default_executor() is get_default_executor()
        assert get_default_executor().max_workers == 1


class TestMap:
    """Test mapping tasks over subdomains."""

    @pytest.mark.parametrize("workers", [1, 4])
    def test_results_in_input_order(self, workers):
        """Results follow the input order whatever the completion order."""
        def slow_square(i):
            time.sleep(0.001 * (5 - i))
            return i * i

        with SubdomainExecutor(max_workers=workers) as executor:
            batch = executor.map(slow_square, list(range(5)))

        assert batch.results == [0, 1, 4, 9, 16]
        assert len(batch.durations) == 5

    def test_deterministic_reduction(self, pooled_executor, rng):
        """Summing pooled results matches the inline sum bit for bit."""
        vectors = [rng.standard_normal(50) for _ in range(8)]
        inline = SubdomainExecutor().map(lambda v: v * 3.0, vectors)
        pooled = pooled_executor.map(lambda v: v * 3.0, vectors)

        np.testing.assert_array_equal(sum(inline.results), sum(pooled.results))

    def test_pool_uses_threads(self, pooled_executor):
        """Tasks run on worker threads when pooled."""
        names = pooled_executor.map(lambda _: threading.current_thread().name, list(range(6))).results
        assert all(name != threading.main_thread().name for name in names)

    def test_single_task_runs_inline(self, pooled_executor):
        names = pooled_executor.map(lambda _: threading.current_thread().name, [0]).results
        assert names == [threading.main_thread().name]

    def test_empty_batch(self, pooled_executor):
        batch = pooled_executor.map(lambda x: x, [])
        assert batch.results == []
        assert batch.critical_path_seconds == 0.0

    def test_exceptions_propagate(self, pooled_executor):
        """A failing task surfaces its exception to the caller."""
        def fail(i):
            if i == 2:
                raise RuntimeError("subdomain 2 failed")
            return i

        with pytest.raises(RuntimeError, match="subdomain 2"):
            pooled_executor.map(fail, list(range(4)))


class TestParallelBatch:
    """Test timing aggregates."""

    def test_critical_path_is_longest_task(self):
        batch = ParallelBatch(results=[1, 2, 3], durations=[0.1, 0.4, 0.2], total_duration_seconds=0.7)
        assert batch.critical_path_seconds == 0.4

    def test_durations_measured(self):
        batch = SubdomainExecutor().map(lambda _: time.sleep(0.01), [0, 1])
        assert min(batch.durations) >= 0.005
        assert batch.total_duration_seconds >= sum(batch.durations) * 0.9


class TestShutdown:
    """Test pool lifecycle."""

    def test_context_manager_releases_pool(self):
        with SubdomainExecutor(max_workers=2) as executor:
            executor.map(lambda x: x, [1, 2])
        assert executor._pool is None

    def test_shutdown_twice(self):
        executor = SubdomainExecutor(max_workers=2)
        executor.shutdown()
        executor.shutdown()
        assert executor._pool is None

    def test_runs_inline_after_shutdown(self):
        executor = SubdomainExecutor(max_workers=2)
        executor.shutdown()
        assert executor.map(lambda x: x + 1, [1, 2]).results == [2, 3]
