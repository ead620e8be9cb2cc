"""Exception types shared across the package.

The CLI maps these onto exit codes: usage and parameter problems exit 2,
data ingestion problems exit 3, numerical and training failures exit 4.
"""


class NetkrigeError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(NetkrigeError, ValueError):
    """Matrix shapes are incompatible with the requested operation."""


class ParameterError(NetkrigeError, ValueError):
    """A configuration value or argument is out of its legal range."""


class NonFiniteError(NetkrigeError, ArithmeticError):
    """An operation produced or received a NaN or Inf entry."""


class GraphCycleError(NetkrigeError, RuntimeError):
    """The differentiation graph contains a cycle (internal error)."""


class IngestionError(NetkrigeError, ValueError):
    """A data file could not be parsed. Carries the offending line."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class TrainingError(NetkrigeError, RuntimeError):
    """Training diverged or failed. Carries the iteration index."""

    def __init__(self, message: str, iteration: int | None = None):
        if iteration is not None:
            message = f"iteration {iteration}: {message}"
        super().__init__(message)
        self.iteration = iteration
