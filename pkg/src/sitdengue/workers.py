"""Order-preserving parallel map used by sweeps and sensitivity runs."""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor

WORKERS_ENV = "SITDENGUE_WORKERS"


def worker_count():
    """Worker processes to use: $SITDENGUE_WORKERS, else the CPU count."""
    value = os.environ.get(WORKERS_ENV)
    if value:
        return max(1, int(value))
    return os.cpu_count() or 1


def map_jobs(func, jobs, workers=None):
    """[func(j) for j in jobs], optionally spread over worker processes.

    Results come back in job order whatever the worker count, so output
    does not depend on scheduling.
    """
    jobs = list(jobs)
    workers = worker_count() if workers is None else workers
    if workers <= 1 or len(jobs) < 2:
        return [func(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
