"""Pure-numpy fallback kernels.

Bit-compatible with the numba backend for payload fill and histogram;
the stencil matches to floating-point round-off.
"""

import numpy as np

U64 = np.uint64

_GOLDEN = U64(0x9E3779B97F4A7C15)
_MIX1 = U64(0xBF58476D1CE4E5B9)
_MIX2 = U64(0x94D049BB133111EB)

_spin_buf = np.arange(4096, dtype=np.uint64)


def _laplacian(a):
    return (
        np.roll(a, 1, 0) + np.roll(a, -1, 0)
        + np.roll(a, 1, 1) + np.roll(a, -1, 1)
        + np.roll(a, 1, 2) + np.roll(a, -1, 2)
        - 6.0 * a
    ) / 6.0


def gray_scott_step(u, v, out_u, out_v, du_rate, dv_rate, feed, kill, dt):
    lap_u = _laplacian(u)
    lap_v = _laplacian(v)
    uvv = u * v * v
    np.copyto(out_u, u + dt * (du_rate * lap_u - uvv + feed * (1.0 - u)))
    np.copyto(out_v, v + dt * (dv_rate * lap_v + uvv - (feed + kill) * v))


def histogram_counts(values, lo, hi, bin_count):
    width = (hi - lo) / bin_count
    idx = ((values - lo) / width).astype(np.int64)
    np.clip(idx, 0, bin_count - 1, out=idx)
    return np.bincount(idx, minlength=bin_count).astype(np.int64)


def fill_words(out, key):
    n = out.shape[0]
    with np.errstate(over="ignore"):
        z = (np.arange(n, dtype=np.uint64) + U64(key)) * _GOLDEN
        z = (z ^ (z >> U64(30))) * _MIX1
        z = (z ^ (z >> U64(27))) * _MIX2
        out[:] = z ^ (z >> U64(31))


def spin_chunk(iters):
    # Burns roughly `iters` element updates; numpy ops yield the GIL less
    # readily than the jitted loop, so timing fidelity is reduced on this path.
    global _spin_buf
    b = _spin_buf
    done = 0
    with np.errstate(over="ignore"):
        while done < iters:
            b = (b ^ (b >> U64(30))) * _MIX1
            b ^= _GOLDEN
            done += b.shape[0]
    _spin_buf = b
    return b[0]
