"""Data checking service: histogram peak indicator and scripted schedules.

The indicator is deliberately cheap: bin the field, find the fullest bin,
compare its center against a threshold. Out-of-range values clamp into the
edge bins so the counts always sum to the cell count, which keeps the
conservation invariant exactly testable.

``QualifiedSchedule`` is the deterministic stand-in used by synthetic
workloads so the qualified percentage and temporal distribution are exact
sweep axes rather than emergent properties of a simulation.
"""

import math
import time
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import _kernels
from .errors import ConfigurationError
from .timing import busy_spin_ms

AT_LEAST = "at-least"
AT_MOST = "at-most"

DEFAULT_BIN_COUNT = 100
DEFAULT_RANGE = (0.0, 1.0)


@dataclass(frozen=True)
class Histogram:
    lo: float
    hi: float
    bin_count: int
    counts: np.ndarray

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ConfigurationError("lo must be < hi")
        if self.bin_count < 2:
            raise ConfigurationError("bin_count must be >= 2")
        if len(self.counts) != self.bin_count:
            raise ConfigurationError("counts length != bin_count")

    @property
    def bin_width(self):
        return (self.hi - self.lo) / self.bin_count

    def bin_center(self, i):
        return self.lo + (i + 0.5) * self.bin_width


@dataclass(frozen=True)
class IndicatorResult:
    step_index: int
    peak_position: float
    qualified: bool
    check_cost_ms: float


def build_histogram(field, lo=DEFAULT_RANGE[0], hi=DEFAULT_RANGE[1],
                    bin_count=DEFAULT_BIN_COUNT):
    """Histogram of a ScalarField or array; clamping edge bins."""
    values = field.flat if hasattr(field, "flat") and hasattr(field, "dims") else None
    if values is None:
        values = np.asarray(field, dtype=np.float64).reshape(-1)
    if values.size == 0:
        raise ConfigurationError("cannot histogram an empty field")
    if not lo < hi:
        raise ConfigurationError("lo must be < hi")
    if bin_count < 2:
        raise ConfigurationError("bin_count must be >= 2")
    values = np.ascontiguousarray(values, dtype=np.float64)
    counts = _kernels.histogram_counts(values, float(lo), float(hi), int(bin_count))
    return Histogram(float(lo), float(hi), int(bin_count), counts)


def peak_position(hist):
    """Center of the fullest bin; ties break toward the lowest bin."""
    return hist.bin_center(int(np.argmax(hist.counts)))


def check(field, threshold, direction=AT_MOST, lo=DEFAULT_RANGE[0],
          hi=DEFAULT_RANGE[1], bin_count=DEFAULT_BIN_COUNT, step_index=0):
    """Histogram + peak + threshold verdict, with measured wall cost."""
    if direction not in (AT_LEAST, AT_MOST):
        raise ConfigurationError(f"direction must be '{AT_LEAST}' or '{AT_MOST}'")
    if not (lo <= threshold <= hi):
        raise ConfigurationError(f"threshold {threshold} outside [{lo}, {hi}]")
    t0 = time.perf_counter()
    peak = peak_position(build_histogram(field, lo, hi, bin_count))
    cost_ms = (time.perf_counter() - t0) * 1000.0
    qualified = peak >= threshold if direction == AT_LEAST else peak <= threshold
    return IndicatorResult(step_index, peak, qualified, cost_ms)


class QualifiedSchedule:
    """Which steps of a run count as qualified.

    even(p): step i qualifies iff floor(i*p) > floor((i-1)*p), computed in
    exact rational arithmetic. For p = 20% over 25 steps this yields
    {5, 10, 15, 20, 25} -- one qualified step in every five.
    block(a, b): steps a..b inclusive qualify.
    """

    def __init__(self, total_steps, resolved, mode):
        if total_steps < 1:
            raise ConfigurationError("total_steps must be >= 1")
        bad = [s for s in resolved if not (1 <= s <= total_steps)]
        if bad:
            raise ConfigurationError(f"qualified steps {bad} outside 1..{total_steps}")
        self.total_steps = total_steps
        self.resolved = frozenset(int(s) for s in resolved)
        self.mode = mode

    @classmethod
    def even(cls, total_steps, percentage):
        if not (0.0 <= percentage <= 1.0):
            raise ConfigurationError("percentage must be within [0, 1]")
        p = Fraction(str(percentage)) if isinstance(percentage, float) else Fraction(percentage)
        resolved = [
            i for i in range(1, total_steps + 1)
            if math.floor(i * p) > math.floor((i - 1) * p)
        ]
        return cls(total_steps, resolved, ("even", float(percentage)))

    @classmethod
    def block(cls, total_steps, first_step, last_step):
        if not (1 <= first_step <= last_step <= total_steps):
            raise ConfigurationError(
                f"block {first_step}-{last_step} outside 1..{total_steps}"
            )
        return cls(total_steps, range(first_step, last_step + 1),
                   ("block", first_step, last_step))

    def is_qualified(self, step_index):
        return step_index in self.resolved

    def __len__(self):
        return len(self.resolved)

    def __repr__(self):
        return f"QualifiedSchedule({self.mode}, N={self.total_steps}, |Q|={len(self)})"


def scripted_check(schedule, step_index, emulated_cost_ms=0.0):
    """Deterministic indicator: spends the emulated cost, then answers from
    the schedule. Peak position reports 1.0/0.0 as a synthetic stand-in."""
    if not (1 <= step_index <= schedule.total_steps):
        raise ConfigurationError(
            f"step_index {step_index} outside 1..{schedule.total_steps}"
        )
    t0 = time.perf_counter()
    busy_spin_ms(emulated_cost_ms)
    cost_ms = (time.perf_counter() - t0) * 1000.0
    qualified = schedule.is_qualified(step_index)
    return IndicatorResult(step_index, 1.0 if qualified else 0.0, qualified, cost_ms)
