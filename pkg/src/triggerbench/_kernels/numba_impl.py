"""numba backend: jitted inner loops, GIL released so workers overlap."""

import numpy as np
from numba import njit

U64 = np.uint64

# splitmix64 constants
_GOLDEN = U64(0x9E3779B97F4A7C15)
_MIX1 = U64(0xBF58476D1CE4E5B9)
_MIX2 = U64(0x94D049BB133111EB)


@njit(nogil=True, cache=True)
def gray_scott_step(u, v, out_u, out_v, du_rate, dv_rate, feed, kill, dt):
    # Normalized 7-point stencil (sum of neighbours - 6*center)/6, periodic.
    nx, ny, nz = u.shape
    for x in range(nx):
        xm = x - 1 if x > 0 else nx - 1
        xp = x + 1 if x < nx - 1 else 0
        for y in range(ny):
            ym = y - 1 if y > 0 else ny - 1
            yp = y + 1 if y < ny - 1 else 0
            for z in range(nz):
                zm = z - 1 if z > 0 else nz - 1
                zp = z + 1 if z < nz - 1 else 0
                uc = u[x, y, z]
                vc = v[x, y, z]
                lap_u = (
                    u[xm, y, z] + u[xp, y, z] + u[x, ym, z] + u[x, yp, z]
                    + u[x, y, zm] + u[x, y, zp] - 6.0 * uc
                ) / 6.0
                lap_v = (
                    v[xm, y, z] + v[xp, y, z] + v[x, ym, z] + v[x, yp, z]
                    + v[x, y, zm] + v[x, y, zp] - 6.0 * vc
                ) / 6.0
                uvv = uc * vc * vc
                out_u[x, y, z] = uc + dt * (du_rate * lap_u - uvv + feed * (1.0 - uc))
                out_v[x, y, z] = vc + dt * (dv_rate * lap_v + uvv - (feed + kill) * vc)


@njit(nogil=True, cache=True)
def histogram_counts(values, lo, hi, bin_count):
    # Out-of-range values clamp to the edge bins so counts are conserved.
    counts = np.zeros(bin_count, dtype=np.int64)
    width = (hi - lo) / bin_count
    for i in range(values.shape[0]):
        idx = int((values[i] - lo) / width)
        if idx < 0:
            idx = 0
        elif idx >= bin_count:
            idx = bin_count - 1
        counts[idx] += 1
    return counts


@njit(nogil=True, cache=True)
def fill_words(out, key):
    # splitmix64 over (key + index): counter-based, reproducible, incompressible.
    for i in range(out.shape[0]):
        z = (U64(i) + key) * _GOLDEN
        z = (z ^ (z >> U64(30))) * _MIX1
        z = (z ^ (z >> U64(27))) * _MIX2
        out[i] = z ^ (z >> U64(31))


@njit(nogil=True, cache=True)
def spin_chunk(iters):
    acc = U64(1)
    for _ in range(iters):
        acc = (acc ^ (acc >> U64(30))) * _MIX1
        acc ^= _GOLDEN
    return acc
