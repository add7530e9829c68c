"""First-come-first-served column scheduling for the parallel phases.

A phase hands out column indices from one shared cursor: every idle worker
takes the smallest index not yet claimed. Each column is computed entirely by
the worker that claimed it and written to locations no other column touches,
so the numerical result does not depend on the worker count.
"""

import contextlib
import os
import threading
import time
from dataclasses import dataclass, field

import numpy as np
from threadpoolctl import threadpool_limits

from .errors import WorkerPanic

ENV_THREADS = "MCSDP_THREADS"


def resolve_threads(requested=None):
    """Worker count: explicit value, then ``$MCSDP_THREADS``, then CPU count."""
    if requested is not None:
        u = int(requested)
    elif os.environ.get(ENV_THREADS):
        u = int(os.environ[ENV_THREADS])
    else:
        u = os.cpu_count() or 1
    if u < 1:
        raise ValueError("thread count must be positive")
    return u


class WorkQueue:
    """Shared claim cursor over an index order (ascending by default)."""

    def __init__(self, count, order=None, log=False):
        self.order = np.arange(count) if order is None else np.asarray(order)
        if sorted(self.order.tolist()) != list(range(count)):
            raise ValueError("order must be a permutation of range(count)")
        self._cursor = 0
        self._lock = threading.Lock()
        self.log = [] if log else None

    def claim(self, worker=0):
        with self._lock:
            if self._cursor >= self.order.size:
                return None
            j = int(self.order[self._cursor])
            self._cursor += 1
            if self.log is not None:
                self.log.append((worker, j))
            return j

    def close(self):
        with self._lock:
            self._cursor = self.order.size

    @property
    def remaining(self):
        return self.order[self._cursor:]


@dataclass
class PhaseStats:
    threads: int
    wall: float = 0.0
    busy: list = field(default_factory=list)
    claims: list = field(default_factory=list)


def run_columns(count, task, threads=1, order=None, log=False):
    """Run ``task(j)`` for every ``j`` in ``range(count)`` on ``threads`` workers.

    Returns :class:`PhaseStats`; ``claims`` holds ``(worker, j)`` pairs when
    ``log`` is set. The first failing column is re-raised as
    :class:`WorkerPanic`.
    """
    queue = WorkQueue(count, order, log)
    stats = PhaseStats(threads, busy=[0.0] * threads)
    failures = []

    def worker(p):
        t_busy = 0.0
        while True:
            j = queue.claim(p)
            if j is None:
                break
            t0 = time.perf_counter()
            try:
                task(j)
            except Exception as exc:  # noqa: BLE001 - forwarded to the coordinator
                failures.append((j, exc))
                queue.close()
                break
            t_busy += time.perf_counter() - t0
        stats.busy[p] = t_busy

    t0 = time.perf_counter()
    if threads == 1:
        worker(0)
    else:
        with nested_parallelism_guard("columns", threads):
            pool = [threading.Thread(target=worker, args=(p,), daemon=True) for p in range(threads)]
            for th in pool:
                th.start()
            for th in pool:
                th.join()
    stats.wall = time.perf_counter() - t0
    stats.claims = queue.log or []
    if failures:
        j, exc = min(failures, key=lambda f: f[0])
        raise WorkerPanic(j, exc) from exc
    return stats


def run_scm_assembly(m, column_task, threads=1, order=None, log=False):
    """Assemble the Schur complement matrix and right-hand side by columns.

    ``column_task(j)`` returns ``(b_col, g_j)`` where ``b_col`` holds
    ``B[j:, j]``. Only the lower triangle of ``B`` is written.
    """
    B = np.zeros((m, m))
    g = np.zeros(m)

    def task(j):
        col, gj = column_task(j)
        B[j:, j] = col
        g[j] = gj

    stats = run_columns(m, task, threads, order, log)
    return B, g, stats


def run_dx_assembly(n, column_task, threads=1, log=False):
    """Dispatch the primal-direction columns; ``column_task(k)`` writes its own outputs."""
    return run_columns(n, column_task, threads, None, log)


@contextlib.contextmanager
def nested_parallelism_guard(phase, threads):
    """Pin inner BLAS/LAPACK pools to one thread while ``threads`` workers run.

    With a single worker this is a no-op, so inner kernels keep their pools.
    """
    if threads <= 1:
        yield 1
        return
    with threadpool_limits(limits=1):
        yield 1


def fcfs_makespan(costs, u):
    """Makespan of the claim-smallest-first policy for known per-column costs."""
    free_at = [0.0] * u
    for c in costs:
        p = min(range(u), key=lambda k: (free_at[k], k))
        free_at[p] += c
    return max(free_at)


def round_robin_makespan(costs, u):
    """Makespan of the static ``(j mod u)`` column distribution."""
    loads = [0.0] * u
    for j, c in enumerate(costs):
        loads[j % u] += c
    return max(loads)
