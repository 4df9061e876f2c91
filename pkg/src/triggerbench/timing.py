"""Emulated compute and latency primitives.

Two kinds of waiting, deliberately distinct:

* ``busy_spin_ms`` -- emulated *compute*. Spins the CPU in short jitted
  chunks until a wall-clock deadline, so the duration holds even when
  threads outnumber cores. The chunks release the GIL on the numba backend,
  which keeps concurrent workers honest.
* ``precise_wait_ms`` -- emulated *latency* (transfer time, trigger delay).
  Sleeps, topping off with short sleeps for sub-millisecond accuracy.

``busy_spin_scaled_ms`` is the oversubscription variant: progress is credited
at a caller-supplied rate (<= 1), so a task under contention takes
proportionally longer in wall time, mirroring the cost model.
"""

import os
import time

from . import _kernels

_CHUNK_TARGET_MS = 0.2
_iters_per_ms = None

_yield_cpu = getattr(os, "sched_yield", None) or (lambda: None)


def _calibrate():
    global _iters_per_ms
    probe = 200_000
    # warm up / jit-compile
    _kernels.spin_chunk(1000)
    best = float("inf")
    for _ in range(3):
        t0 = time.perf_counter()
        _kernels.spin_chunk(probe)
        best = min(best, time.perf_counter() - t0)
    _iters_per_ms = max(1000, int(probe / (best * 1000.0)))
    return _iters_per_ms


def spin_iters_per_ms():
    return _iters_per_ms if _iters_per_ms is not None else _calibrate()


def busy_spin_ms(duration_ms):
    """Occupy the CPU for ``duration_ms`` of wall time.

    Yields the core after every chunk so that when spinning threads
    outnumber cores they rotate at chunk granularity rather than OS
    timeslice granularity; deadline overshoot stays small either way.
    """
    if duration_ms <= 0:
        return
    chunk = max(1000, int(spin_iters_per_ms() * _CHUNK_TARGET_MS))
    deadline = time.perf_counter() + duration_ms / 1000.0
    while time.perf_counter() < deadline:
        _kernels.spin_chunk(chunk)
        _yield_cpu()


def busy_spin_scaled_ms(duration_ms, rate_fn):
    """Spin until ``duration_ms`` of *virtual* compute has been credited.

    ``rate_fn()`` returns the current progress rate in (0, 1]; wall time per
    unit of virtual work is 1/rate. The rate is re-sampled every chunk, so
    changes in contention take effect within ~0.2 ms.
    """
    if duration_ms <= 0:
        return
    chunk = max(1000, int(spin_iters_per_ms() * _CHUNK_TARGET_MS))
    remaining = duration_ms
    while remaining > 0:
        t0 = time.perf_counter()
        _kernels.spin_chunk(chunk)
        _yield_cpu()
        elapsed_ms = (time.perf_counter() - t0) * 1000.0
        rate = rate_fn()
        if rate <= 0:
            rate = 1e-6
        remaining -= elapsed_ms * rate


def precise_wait_ms(duration_ms):
    """Emulated latency (transfer time, trigger delay).

    Implemented as a yielding spin rather than a sleep: on a saturated box a
    sleeper's wakeup can slip by a whole scheduler timeslice, whereas a
    yielding spinner holds its deadline to within a chunk. The wasted cycles
    do not disturb other workers because every emulated duration in the
    system is wall-clock based.
    """
    busy_spin_ms(duration_ms)
