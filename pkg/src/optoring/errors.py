"""Exception hierarchy shared by all optoring modules."""


class OptoringError(Exception):
    """Base class for every error raised by the library."""


class DomainError(OptoringError, ValueError):
    """An input lies outside the domain where an operation is defined."""


class ConfigError(OptoringError, ValueError):
    """A configuration document could not be parsed or validated."""

    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        if line is not None:
            message = f"{message} (line {line}, column {column})"
        super().__init__(message)


class SolverError(OptoringError, RuntimeError):
    """An iterative solver failed to converge.

    ``residual`` carries the last residual reached before giving up.
    """

    def __init__(self, message, residual=float("nan")):
        self.residual = residual
        super().__init__(f"{message} (last residual {residual:.3e})")


class NumericalError(OptoringError, RuntimeError):
    """A dense linear-algebra step failed or violated a self-check."""


class InstabilityError(OptoringError, RuntimeError):
    """The requested steady state does not exist because the dynamics is unstable.

    ``unstable`` lists what was found unstable (k values for ring analytics,
    eigenvalues for the linearized drift matrix).
    """

    def __init__(self, message, unstable=()):
        self.unstable = tuple(unstable)
        super().__init__(message)
