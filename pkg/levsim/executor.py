"""
ThreadPoolExecutor that runs each submitted call in a copy of the
context it was submitted from.

Without it, code running in a worker thread starts from an empty
context and would not see the caller's :data:`levsim.context.settings`
(strict mode, thread cap). Sweeps and ensembles fan out through
:func:`parallel_map`, which keeps results in submission order.
"""

import contextvars
import logging

from concurrent.futures import ThreadPoolExecutor

from .context import thread_count

__all__ = ["ContextPreservingExecutor", "parallel_map"]

logger = logging.getLogger(__name__)


class ContextPreservingExecutor(ThreadPoolExecutor):
    """Drop in context preserving replacement to concurrent.futures.ThreadPoolExecutor

    The context is captured at submit time, and each task gets its own copy,
    so values a task assigns never leak into sibling tasks nor back into the
    submitter.
    """

    def submit(self, fn, /, *args, **kwargs):
        ctx = contextvars.copy_context()
        return super().submit(ctx.run, fn, *args, **kwargs)


def parallel_map(fn, items, threads=None):
    """Apply ``fn`` to every item, possibly on worker threads.

    Results come back in the order of ``items``. With a single worker
    everything runs inline in the calling thread.
    """
    items = list(items)
    workers = min(thread_count(threads), max(len(items), 1))
    if workers == 1:
        return [contextvars.copy_context().run(fn, item) for item in items]
    logger.debug("mapping %d items over %d threads", len(items), workers)
    with ContextPreservingExecutor(workers) as executor:
        futures = [executor.submit(fn, item) for item in items]
        return [future.result() for future in futures]
