"""Typed exceptions raised across the package.

Everything derives from SwarmlimError so callers can catch package failures
with one handler.  Classes also inherit the closest builtin (ValueError or
RuntimeError) to stay friendly to generic error handling.
"""


class SwarmlimError(Exception):
    """Base class for all package errors."""


class DimensionMismatchError(SwarmlimError, ValueError):
    """Array dimensions disagree (points, weights, grids, species)."""


class SpeciesCountMismatchError(SwarmlimError, ValueError):
    """Number of species in two containers differs."""


class SingularEvaluationError(SwarmlimError, ValueError):
    """A singular interaction kernel was evaluated at zero separation."""


class SingularEntryError(SwarmlimError, ValueError):
    """A kernel matrix carries a singular kernel where a smooth one is required."""


class SchemeMismatchError(SwarmlimError, ValueError):
    """Time-stepping scheme is not valid for the requested dynamics order."""


class MissingVelocitiesError(SwarmlimError, ValueError):
    """Second-order dynamics requested on a state without velocities."""


class SizeCapError(SwarmlimError, ValueError):
    """Problem size exceeds a configured cap."""


class GridTooSmallError(SwarmlimError, ValueError):
    """Grid does not cover the support of the data to be deposited."""


class GridMismatchError(SwarmlimError, ValueError):
    """Two grids expected to be identical differ."""


class NormalizationError(SwarmlimError, ValueError):
    """Weights are not a probability vector (positive, summing to one)."""


class FieldEvaluationError(SwarmlimError, RuntimeError):
    """A velocity/force field produced non-finite values."""


class NoConvergenceError(SwarmlimError, RuntimeError):
    """Fixed-point iteration failed to reach tolerance within the budget."""


class DegenerateInitialDistanceError(SwarmlimError, ValueError):
    """Stability ratio undefined: initial configurations coincide."""


class QuadratureDivergenceError(SwarmlimError, ValueError):
    """Requested quadrature diverges for the given kernel exponent."""


class CFLViolationError(SwarmlimError, RuntimeError):
    """Finite-volume step would violate the CFL restriction."""


class ConfigError(SwarmlimError, ValueError):
    """Configuration file is invalid.  Carries the offending field path."""

    def __init__(self, path: str, message: str):
        self.path = path
        self.message = message
        super().__init__(f"{path}: {message}")


class OutputError(SwarmlimError, OSError):
    """Run artifacts could not be written."""


class InsufficientValuesError(SwarmlimError, ValueError):
    """A sweep needs at least two parameter values."""


class NotRegularizableWarning(UserWarning):
    """Regularization requested on a kernel that is already smooth."""
