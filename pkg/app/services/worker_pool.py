import logging
import os
from concurrent.futures import ProcessPoolExecutor
from typing import Any, Callable, Iterable, List, Optional

from app.core.config import settings

logger = logging.getLogger(__name__)


class TrialPool:
    """モンテカルロ試行をプロセスプールに配るサービス

    Results come back in task order whatever the worker count, so aggregation
    downstream sees the same sequence at --jobs 1 and --jobs N.
    """

    def __init__(self, jobs: Optional[int] = None):
        jobs = settings.JOBS if jobs is None else jobs
        self.jobs = max(1, int(jobs or os.cpu_count() or 1))

    def _chunksize(self, count: int) -> int:
        return max(1, count // (self.jobs * 4))

    def map(self, func: Callable[[Any], Any], tasks: Iterable[Any], label: str = "trials") -> List[Any]:
        """func を各タスクに適用し、タスク順に結果を返す

        func and the tasks must be picklable (module-level functions or
        functools.partial of them).
        """
        tasks = list(tasks)
        if not tasks:
            return []

        if self.jobs == 1 or len(tasks) == 1:
            logger.debug(f"Running {len(tasks)} {label} inline")
            return [func(task) for task in tasks]

        workers = min(self.jobs, len(tasks))
        logger.debug(f"Dispatching {len(tasks)} {label} to {workers} workers")
        try:
            with ProcessPoolExecutor(max_workers=workers) as executor:
                return list(executor.map(func, tasks, chunksize=self._chunksize(len(tasks))))
        except Exception as e:
            logger.error(f"Error while running {label}: {str(e)}")
            raise
