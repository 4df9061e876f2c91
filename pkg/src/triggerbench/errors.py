class ConfigurationError(ValueError):
    """Invalid workload, parameter, or wiring configuration."""


class NumericalDivergenceError(ArithmeticError):
    """A stepped field produced NaN or Inf."""


class StagingError(RuntimeError):
    """Misuse of the staging service."""


class DuplicateStepError(StagingError):
    """A (variable, step) pair was put more than once."""
