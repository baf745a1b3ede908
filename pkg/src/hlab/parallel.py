"""Deterministic work distribution over sample indices.

Workers receive pure, picklable tasks; results are assembled in task order so
the output is identical for any worker count, including the serial path.
"""

from __future__ import annotations

import multiprocessing
from concurrent.futures import ProcessPoolExecutor


def map_indexed(worker, tasks: list, threads: int = 1) -> list:
    """Apply worker to each task, in order; threads > 1 uses a process pool."""
    tasks = list(tasks)
    if threads <= 1 or len(tasks) <= 1:
        return [worker(t) for t in tasks]
    ctx = multiprocessing.get_context("fork")
    chunk = max(1, len(tasks) // (4 * threads))
    with ProcessPoolExecutor(max_workers=threads, mp_context=ctx) as ex:
        return list(ex.map(worker, tasks, chunksize=chunk))
