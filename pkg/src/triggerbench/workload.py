"""Workload configuration shared by the live runner, the cost model, and the
harness. JSON configs mirror WorkloadSpec field for field; unknown keys are
rejected so a typo cannot silently change an experiment.
"""

import dataclasses
import json
import os
from dataclasses import dataclass, field

from .errors import ConfigurationError
from .indicator import AT_MOST, QualifiedSchedule

PATTERNS = ("P", "C", "M")

MIB = 1024 * 1024

POOL_ENV_VAR = "TRIGGERBENCH_THREADS"


@dataclass(frozen=True)
class GrayScottSource:
    """Configuration for runs driven by the real reaction-diffusion producer."""

    dims: tuple = (32, 32, 32)
    Du: float = 0.2
    Dv: float = 0.1
    F: float = 0.02
    k: float = 0.048
    dt: float = 2.0
    noise_amplitude: float = 1e-7
    threshold: float = 0.5
    direction: str = AT_MOST
    bin_count: int = 100

    def params(self):
        from .simkernel import GrayScottParams

        return GrayScottParams(self.Du, self.Dv, self.F, self.k, self.dt,
                               self.noise_amplitude)


@dataclass(frozen=True)
class WorkloadSpec:
    """One experiment configuration (see module docstring for JSON mapping)."""

    patterns: tuple = PATTERNS
    steps: int = 10
    payload_bytes: int = 8 * MIB
    qualified_pct: float = 0.2
    distribution: str = "even"  # "even" | "block:<a>-<b>"
    instances: int = 1
    cost_source: str = "synthetic"  # "synthetic" | "gray-scott"
    preset: str = "a"  # cost profile preset for synthetic sources
    pool: int = 4
    pool_mode: str = "queueing"  # "queueing" | "slowdown"
    oversubscription_slowdown: float = 1.14
    repetitions: int = 3
    seed: int = 0
    gray_scott: GrayScottSource = None

    def __post_init__(self):
        patterns = tuple(p.upper() for p in (
            self.patterns if not isinstance(self.patterns, str) else [self.patterns]
        ))
        object.__setattr__(self, "patterns", patterns)
        if not patterns or any(p not in PATTERNS for p in patterns):
            raise ConfigurationError(f"patterns must be drawn from {PATTERNS}")
        if self.steps < 1:
            raise ConfigurationError("steps must be >= 1")
        if self.payload_bytes < 1:
            raise ConfigurationError("payload_bytes must be >= 1")
        if not (0.0 <= self.qualified_pct <= 1.0):
            raise ConfigurationError("qualified_pct must be within [0, 1]")
        if self.instances < 1:
            raise ConfigurationError("instances must be >= 1")
        if self.pool < 1:
            raise ConfigurationError("pool must be >= 1")
        if self.repetitions < 1:
            raise ConfigurationError("repetitions must be >= 1")
        if self.cost_source not in ("synthetic", "gray-scott"):
            raise ConfigurationError(f"unknown cost_source {self.cost_source!r}")
        if self.pool_mode not in ("queueing", "slowdown"):
            raise ConfigurationError(f"unknown pool_mode {self.pool_mode!r}")
        if self.oversubscription_slowdown < 1.0:
            raise ConfigurationError("oversubscription_slowdown must be >= 1")
        if self.preset.lower() not in ("a", "b"):
            raise ConfigurationError("preset must be 'a' or 'b'")
        object.__setattr__(self, "preset", self.preset.lower())
        self.schedule()  # validates the distribution string
        if self.cost_source == "gray-scott" and self.gray_scott is None:
            object.__setattr__(self, "gray_scott", GrayScottSource())

    @property
    def size_mib(self):
        return self.payload_bytes / MIB

    def schedule(self):
        """Resolve the qualified-step schedule for this workload."""
        dist = self.distribution.strip().lower()
        if dist == "even":
            return QualifiedSchedule.even(self.steps, self.qualified_pct)
        if dist.startswith("block:"):
            spec = dist[len("block:"):]
            try:
                first, last = (int(x) for x in spec.split("-", 1))
            except ValueError:
                raise ConfigurationError(
                    f"block distribution must look like 'block:3-7', got {self.distribution!r}"
                ) from None
            return QualifiedSchedule.block(self.steps, first, last)
        raise ConfigurationError(f"unknown distribution {self.distribution!r}")

    def effective_pool(self):
        """Pool size after the global env cap (downward only)."""
        cap = os.environ.get(POOL_ENV_VAR)
        if cap:
            try:
                return max(1, min(self.pool, int(cap)))
            except ValueError:
                raise ConfigurationError(f"{POOL_ENV_VAR}={cap!r} is not an integer") from None
        return self.pool

    def replace(self, **kw):
        return dataclasses.replace(self, **kw)

    def to_json_dict(self):
        d = dataclasses.asdict(self)
        d["patterns"] = list(self.patterns)
        if self.gray_scott is not None:
            d["gray_scott"]["dims"] = list(self.gray_scott.dims)
        return d


def workload_from_dict(data):
    if not isinstance(data, dict):
        raise ConfigurationError("workload config must be a JSON object")
    known = {f.name for f in dataclasses.fields(WorkloadSpec)}
    unknown = set(data) - known
    if unknown:
        raise ConfigurationError(f"unknown workload config keys: {sorted(unknown)}")
    kw = dict(data)
    if "gray_scott" in kw and kw["gray_scott"] is not None:
        gs = kw["gray_scott"]
        gs_known = {f.name for f in dataclasses.fields(GrayScottSource)}
        gs_unknown = set(gs) - gs_known
        if gs_unknown:
            raise ConfigurationError(f"unknown gray_scott config keys: {sorted(gs_unknown)}")
        if "dims" in gs:
            gs = dict(gs, dims=tuple(gs["dims"]))
        kw["gray_scott"] = GrayScottSource(**gs)
    if "patterns" in kw:
        kw["patterns"] = tuple(kw["patterns"])
    return WorkloadSpec(**kw)


def load_workload(path):
    with open(path, "r", encoding="utf-8") as f:
        return workload_from_dict(json.load(f))
