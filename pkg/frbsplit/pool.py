from concurrent.futures import Executor, ProcessPoolExecutor
from typing import Any, Callable, Iterable

import logging

logger = logging.getLogger(__name__)


class TrialPool:
    """
    Runs independent benchmark tasks, in-process when workers == 1 and on a
    process pool otherwise. Results always come back in task order.
    """

    def __init__(self, workers: int = 1):
        self.workers = workers
        self.executor: Executor | None = None

    def _get_executor(self) -> Executor:
        """Get or create the process pool"""
        if self.executor is None:
            self.executor = ProcessPoolExecutor(max_workers=self.workers)
            logger.debug(f"Started process pool with {self.workers} workers")
        return self.executor

    def map(self, fn: Callable[..., Any], tasks: Iterable[tuple]) -> list[Any]:
        """
        Apply fn(*task) to every task.

        Raises:
            whatever fn raises, after logging it
        """
        tasks = list(tasks)
        if self.workers == 1:
            return [fn(*task) for task in tasks]

        executor = self._get_executor()
        futures = [executor.submit(fn, *task) for task in tasks]
        results = []
        for task, future in zip(tasks, futures):
            try:
                results.append(future.result())
            except Exception as e:
                logger.error(f"Task failed: {fn.__name__}{task} - {e}")
                for pending in futures:
                    pending.cancel()
                raise
        return results

    def close(self):
        """Shut the pool down"""
        if self.executor is not None:
            self.executor.shutdown(wait=True, cancel_futures=True)
            self.executor = None

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        self.close()
