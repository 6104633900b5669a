"""Exception hierarchy used throughout the package."""


class GRHMCError(Exception):
    """Base class for all sampler errors."""


class ContractViolation(GRHMCError, ValueError):
    """An operation was called with arguments outside its contract."""


class ConfigError(GRHMCError, ValueError):
    """Invalid configuration value."""


class NonFiniteError(GRHMCError, FloatingPointError):
    """A density, energy or derivative evaluated to a non-finite value.

    Attributes
    ----------
    position : ndarray or None
        The (unstandardized) position at which the failure occurred.
    """

    def __init__(self, message, position=None):
        super().__init__(message)
        self.position = position


class IntegrationFailure(GRHMCError, RuntimeError):
    """The ODE integrator or event locator could not make progress."""

    def __init__(self, message, dump=None):
        super().__init__(message)
        self.dump = dump


class DegenerateBoundary(GRHMCError, ValueError):
    """A constraint gradient vanished at a boundary point."""


class InitializationError(GRHMCError, ValueError):
    """The initial state lies in a region of zero density."""


class SolverError(GRHMCError, RuntimeError):
    """A numerical root solve failed to reach its tolerance."""

    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = residuals


class DataError(GRHMCError, ValueError):
    """Malformed input data file.

    Attributes
    ----------
    line : int or None
        1-based line number of the offending row.
    """

    def __init__(self, message, line=None):
        super().__init__(message)
        self.line = line
