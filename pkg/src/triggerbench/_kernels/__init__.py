"""Hot numeric kernels with selectable backend.

Two interchangeable implementations live side by side:

* ``numba_impl`` -- ``@njit(nogil=True)`` kernels (default when numba imports)
* ``numpy_impl`` -- pure-numpy fallback

Selection: set ``TRIGGERBENCH_KERNELS=numpy`` (or ``numba``) before import.
``triggerbench kernel-bench`` compares both backends on the same inputs.
"""

import os

_requested = os.environ.get("TRIGGERBENCH_KERNELS", "").strip().lower()

if _requested not in ("", "numba", "numpy"):
    raise RuntimeError(
        f"TRIGGERBENCH_KERNELS must be 'numba' or 'numpy', got {_requested!r}"
    )

if _requested == "numpy":
    from . import numpy_impl as _impl

    BACKEND = "numpy"
else:
    try:
        from . import numba_impl as _impl

        BACKEND = "numba"
    except ImportError:
        if _requested == "numba":
            raise
        from . import numpy_impl as _impl

        BACKEND = "numpy"

gray_scott_step = _impl.gray_scott_step
histogram_counts = _impl.histogram_counts
fill_words = _impl.fill_words
spin_chunk = _impl.spin_chunk

_warm = False


def warmup():
    """Compile/first-touch every kernel so run timing excludes jit cost."""
    global _warm
    if _warm:
        return
    import numpy as np

    shape = (4, 4, 4)
    u = np.ones(shape)
    v = np.zeros(shape)
    gray_scott_step(u, v, np.empty(shape), np.empty(shape), 0.2, 0.1, 0.02, 0.048, 1.0)
    histogram_counts(np.zeros(8), 0.0, 1.0, 4)
    fill_words(np.empty(8, dtype=np.uint64), np.uint64(1))
    spin_chunk(1000)
    _warm = True


__all__ = [
    "BACKEND",
    "gray_scott_step",
    "histogram_counts",
    "fill_words",
    "spin_chunk",
    "warmup",
]
