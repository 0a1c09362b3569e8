"""Exception types shared across the package."""


class FinslerLabError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(FinslerLabError):
    """Malformed or invalid metric / chart configuration."""


class SingularEvaluationError(FinslerLabError):
    """A field was evaluated where it is not defined (e.g. F at y = 0)."""


class DegenerateMetricError(FinslerLabError):
    """Fundamental tensor singular or too ill-conditioned to invert."""

    def __init__(self, message, x=None, y=None):
        super().__init__(message)
        self.x = x
        self.y = y


class ChartExitError(FinslerLabError):
    """An integrated path left the chart domain box."""

    def __init__(self, message, last_valid_index):
        super().__init__(message)
        self.last_valid_index = last_valid_index
