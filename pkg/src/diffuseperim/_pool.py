from __future__ import annotations

import logging
import sys
from collections.abc import Callable, Iterable
from concurrent.futures import Future, ThreadPoolExecutor, wait
from contextvars import copy_context
from functools import partial
from typing import TypeVar

if sys.version_info < (3, 11):
    from exceptiongroup import ExceptionGroup

T = TypeVar("T")
T_Retval = TypeVar("T_Retval")

logger: logging.Logger = logging.getLogger(__name__)


class WorkerPool:
    """
    Runs independent sweep items on worker threads.

    Each call runs in a copy of the submitting thread's context. Results come back in
    input order; if any item fails, every item is still waited for and the failures
    are raised together as an :exc:`ExceptionGroup`.
    """

    def __init__(self, threads: int = 1):
        if threads < 1:
            raise ValueError("threads must be at least 1")

        self.threads = threads

    def map(self, func: Callable[[T], T_Retval], items: Iterable[T]) -> list[T_Retval]:
        items = list(items)
        if self.threads == 1 or len(items) < 2:
            return self._map_serial(func, items)

        with ThreadPoolExecutor(max_workers=self.threads) as executor:
            futures: list[Future[T_Retval]] = [
                executor.submit(partial(copy_context().run, func, item))
                for item in items
            ]
            wait(futures)

        exceptions = [exc for f in futures if (exc := f.exception()) is not None]
        if exceptions:
            raise ExceptionGroup(
                f"{len(exceptions)} of {len(items)} sweep items failed", exceptions
            )

        return [f.result() for f in futures]

    @staticmethod
    def _map_serial(
        func: Callable[[T], T_Retval], items: list[T]
    ) -> list[T_Retval]:
        results: list[T_Retval] = []
        exceptions: list[Exception] = []
        for item in items:
            try:
                results.append(func(item))
            except Exception as exc:
                logger.debug("sweep item %r failed: %s", item, exc)
                exceptions.append(exc)

        if exceptions:
            raise ExceptionGroup(
                f"{len(exceptions)} of {len(items)} sweep items failed", exceptions
            )

        return results
