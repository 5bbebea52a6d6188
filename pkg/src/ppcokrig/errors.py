"""Exception types raised across the package.

The CLI maps these onto exit codes: validation/domain problems exit with 2,
numerical failures with 3.
"""


class PPCokrigError(Exception):
    """Base class for all package errors."""


class DomainError(PPCokrigError, ValueError):
    """An argument lies outside the domain of an operation."""


class ValidationError(PPCokrigError, ValueError):
    """Input data failed structural validation (shapes, duplicates, files)."""


class DegreesOfFreedomError(DomainError):
    """Too few observations for the number of regression coefficients."""


class NumericalError(PPCokrigError, ArithmeticError):
    """A computation produced an unusable result."""


class SingularMatrixError(NumericalError):
    """Cholesky factorization failed even at the maximum jitter."""


class OptimizationError(NumericalError):
    """No optimizer restart produced a finite objective value."""
