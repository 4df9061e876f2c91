"""triggerbench: desk-scale benchmark of dynamic task-trigger patterns for
loosely coupled simulation/analytics workflows, with a matching
discrete-event cost model."""

__version__ = "0.1.0"

from ._kernels import BACKEND as KERNEL_BACKEND
from .workload import MIB, WorkloadSpec

__all__ = ["KERNEL_BACKEND", "MIB", "WorkloadSpec", "__version__"]
