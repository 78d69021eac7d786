"""Exception hierarchy shared across the package."""


class HydroscaleError(Exception):
    """Base class for all package errors."""


class DomainError(HydroscaleError):
    """An argument lies outside the mathematical domain of an operation."""


class ConvergenceError(HydroscaleError):
    """A series or iteration failed to converge within its budget."""


class StabilityError(HydroscaleError):
    """A time integration detected blow-up or a violated CFL condition."""


class BudgetError(HydroscaleError):
    """An event or work budget was exceeded; partial state is attached."""

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class ConfigError(HydroscaleError):
    """A run configuration is malformed or inconsistent."""


class UnsupportedFluxError(HydroscaleError):
    """A flux table is too pathological for the envelope construction."""
