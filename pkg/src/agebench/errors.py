"""Exception types shared across the package."""


class AgebenchError(Exception):
    """Base class for package-specific failures."""


class NumericsError(AgebenchError):
    """A numerical routine exhausted its budget or failed its error target.

    Carries ``residual``, the best available estimate of the remaining error,
    when one is known.
    """

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class InsufficientDataError(AgebenchError):
    """A simulation produced too little data for some source."""


class SolverError(AgebenchError):
    """An optimization solver failed to converge."""


class SchemaError(AgebenchError):
    """An experiment description failed validation."""
