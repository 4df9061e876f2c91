"""Data producers: a 3D Gray-Scott reaction-diffusion stepper and a
synthetic producer with controllable compute cost and payload size.

The Gray-Scott system is the standard two-species model

    du/dt = Du * lap(u) - u*v^2 + F*(1 - u)
    dv/dt = Dv * lap(v) + u*v^2 - (F + k)*v

integrated with explicit Euler on a periodic grid. The discrete Laplacian is
the 7-point stencil normalized by 1/6 (neighbour average minus center), so
the explicit-Euler stability bound reads dt * max(Du, Dv) < 1.

The default parameter preset is calibrated so that a 64^3 run seeded with a
central block moves from a concentrated state (u-histogram peak in the top
bin around step 25) to a scattered state (peak near 0.3 by step ~1000).
The preset is a configuration default, not ground truth.
"""

import struct
import time
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import ConfigurationError, NumericalDivergenceError
from .staging import StepPayload
from .timing import busy_spin_ms

#: (u, v) values inside the initial seed block.
SEED_U = 0.25
SEED_V = 0.5

_FIELD_MAGIC = struct.Struct("<3i")


@dataclass(frozen=True)
class GrayScottParams:
    """Gray-Scott coefficients plus step size and optional noise."""

    Du: float = 0.2
    Dv: float = 0.1
    F: float = 0.02
    k: float = 0.048
    dt: float = 2.0
    noise_amplitude: float = 1e-7

    def __post_init__(self):
        if self.dt <= 0:
            raise ConfigurationError("dt must be > 0")
        if self.Du < 0 or self.Dv < 0 or self.F < 0 or self.k < 0:
            raise ConfigurationError("Du, Dv, F, k must be >= 0")
        if self.noise_amplitude < 0:
            raise ConfigurationError("noise_amplitude must be >= 0")
        # Stability guard for the normalized 7-point stencil: with effective
        # diffusivities D/6 the explicit-Euler bound dt*(D/6)*6 < 1 reduces to
        # dt*D < 1.
        if self.dt * max(self.Du, self.Dv) >= 1.0:
            raise ConfigurationError(
                f"unstable explicit-Euler step: dt*max(Du,Dv) = "
                f"{self.dt * max(self.Du, self.Dv):.3f} >= 1"
            )


@dataclass
class ScalarField:
    """Dense 3D grid of concentrations, row-major, unit spacing."""

    dims: tuple
    values: np.ndarray
    cell_size: float = 1.0

    def __post_init__(self):
        self.dims = tuple(int(d) for d in self.dims)
        if len(self.dims) != 3 or any(d < 1 for d in self.dims):
            raise ConfigurationError(f"dims must be three positive ints, got {self.dims}")
        self.values = np.ascontiguousarray(self.values, dtype=np.float64)
        if self.values.shape != self.dims:
            if self.values.size != np.prod(self.dims):
                raise ConfigurationError(
                    f"values length {self.values.size} != nx*ny*nz {np.prod(self.dims)}"
                )
            self.values = self.values.reshape(self.dims)

    @property
    def flat(self):
        return self.values.reshape(-1)

    def tobytes(self):
        return self.values.astype("<f8", copy=False).tobytes()

    def dump(self, path):
        """Write a 3-int32 little-endian header (nx, ny, nz) + f8 data."""
        with open(path, "wb") as f:
            f.write(_FIELD_MAGIC.pack(*self.dims))
            f.write(self.tobytes())

    @classmethod
    def load(cls, path):
        with open(path, "rb") as f:
            dims = _FIELD_MAGIC.unpack(f.read(_FIELD_MAGIC.size))
            data = np.frombuffer(f.read(), dtype="<f8")
        return cls(dims=dims, values=data.reshape(dims))


def default_seed_box(dims):
    """Central cube, side ~3/16 of the smallest dimension (>= 2)."""
    side = max(2, (min(dims) * 3) // 16)
    box = []
    for n in dims:
        lo = (n - side) // 2
        box.append((lo, min(n, lo + side)))
    return tuple(box)


def _validate_box(dims, box):
    if len(box) != 3:
        raise ConfigurationError("seed_box must give (lo, hi) per axis")
    for (lo, hi), n in zip(box, dims):
        if not (0 <= lo <= hi <= n):
            raise ConfigurationError(
                f"seed_box axis range ({lo}, {hi}) outside grid of size {n}"
            )


def gs_init(dims, params=None, seed_box=None, rng=None):
    """Initial (u, v) fields: u=1, v=0 except u=0.25, v=0.5 in the seed box.

    ``seed_box`` is ((x0,x1),(y0,y1),(z0,z1)) half-open; None selects a
    central block; a zero-volume box leaves the fields unseeded. When ``rng``
    is given and the params carry noise, uniform noise is added to u after
    seeding.
    """
    params = params or GrayScottParams()
    dims = tuple(int(d) for d in dims)
    box = default_seed_box(dims) if seed_box is None else tuple(seed_box)
    _validate_box(dims, box)
    u = np.ones(dims, dtype=np.float64)
    v = np.zeros(dims, dtype=np.float64)
    (x0, x1), (y0, y1), (z0, z1) = box
    u[x0:x1, y0:y1, z0:z1] = SEED_U
    v[x0:x1, y0:y1, z0:z1] = SEED_V
    if rng is not None and params.noise_amplitude > 0:
        u += rng.uniform(-params.noise_amplitude, params.noise_amplitude, size=dims)
    return ScalarField(dims, u), ScalarField(dims, v)


def gs_step(u, v, params, rng=None, step_index=None):
    """One explicit-Euler step. Pure: returns new fields.

    Noise (when configured and ``rng`` given) is added to u only, scaled by
    dt, matching the per-step symmetry-breaking term of common Gray-Scott
    driver codes.
    """
    if u.dims != v.dims:
        raise ConfigurationError(f"u dims {u.dims} != v dims {v.dims}")
    out_u = np.empty_like(u.values)
    out_v = np.empty_like(v.values)
    _kernels.gray_scott_step(
        u.values, v.values, out_u, out_v,
        params.Du, params.Dv, params.F, params.k, params.dt,
    )
    if rng is not None and params.noise_amplitude > 0:
        out_u += params.dt * rng.uniform(
            -params.noise_amplitude, params.noise_amplitude, size=u.dims
        )
    if not np.isfinite(out_u).all() or not np.isfinite(out_v).all():
        where = "" if step_index is None else f" at step {step_index}"
        raise NumericalDivergenceError(f"non-finite field value{where}")
    return ScalarField(u.dims, out_u), ScalarField(v.dims, out_v)


class GrayScottProducer:
    """Drives a Gray-Scott run step by step, emitting the u field.

    Single-owner: exactly one worker advances an instance at a time.
    """

    def __init__(self, dims=(64, 64, 64), params=None, seed=0, seed_box=None,
                 variable="u"):
        self.params = params or GrayScottParams()
        self.rng = np.random.default_rng(seed)
        self.u, self.v = gs_init(dims, self.params, seed_box, rng=self.rng)
        self.variable = variable
        self.step_index = 0

    @property
    def payload_nbytes(self):
        return self.u.values.nbytes

    def advance(self):
        self.step_index += 1
        self.u, self.v = gs_step(self.u, self.v, self.params,
                                 rng=self.rng, step_index=self.step_index)
        return self.u

    def payload(self):
        data = np.frombuffer(self.u.tobytes(), dtype=np.uint8)
        return StepPayload(
            step_index=self.step_index,
            variable=self.variable,
            data=data,
            produced_at=time.perf_counter() * 1000.0,
        )


@dataclass(frozen=True)
class SyntheticProducerSpec:
    """Synthetic producer: fixed payload size and emulated compute per step."""

    payload_bytes: int
    gen_cost_ms: float = 0.0
    steps: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.payload_bytes <= 0:
            raise ConfigurationError("payload_bytes must be > 0")
        if self.steps < 1:
            raise ConfigurationError("steps must be >= 1")
        if self.gen_cost_ms < 0:
            raise ConfigurationError("gen_cost_ms must be >= 0")


def payload_key(seed, step_index):
    # Distinct 64-bit stream key per (seed, step).
    return np.uint64((int(seed) * 0x100000001B3 + int(step_index)) & 0xFFFFFFFFFFFFFFFF)


def payload_bytes(seed, step_index, nbytes):
    """Deterministic pseudo-random bytes, pure in (seed, step_index)."""
    words = (int(nbytes) + 7) // 8
    buf = np.empty(words, dtype=np.uint64)
    _kernels.fill_words(buf, payload_key(seed, step_index))
    return buf.view(np.uint8)[: int(nbytes)]


def synth_produce(spec, step_index, variable="synthetic"):
    """Produce one step's payload after emulating the generation cost.

    The time spent materializing the payload counts against the configured
    gen cost; the remainder is burned as a busy spin so the step occupies a
    worker like real compute.
    """
    if not (1 <= step_index <= spec.steps):
        raise ConfigurationError(
            f"step_index {step_index} outside 1..{spec.steps}"
        )
    t0 = time.perf_counter()
    data = payload_bytes(spec.seed, step_index, spec.payload_bytes)
    spent_ms = (time.perf_counter() - t0) * 1000.0
    busy_spin_ms(spec.gen_cost_ms - spent_ms)
    return StepPayload(
        step_index=step_index,
        variable=variable,
        data=data,
        produced_at=time.perf_counter() * 1000.0,
    )
