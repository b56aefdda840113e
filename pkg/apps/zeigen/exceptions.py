"""
Custom exceptions for the tensor eigensolver application.

Solver non-convergence and breakdown are reported through the trace status,
not raised; these exceptions cover invalid inputs and undefined quantities.
"""


class TensorEigenError(Exception):
    """Base exception for tensor eigensolver related errors."""
    pass


class InvalidTensorError(TensorEigenError):
    """Raised when tensor entries, files or arrays are malformed."""
    pass


class TensorTooLargeError(TensorEigenError):
    """Raised when dense storage would exceed the configured memory cap."""
    pass


class DimensionMismatchError(TensorEigenError):
    """Raised when a vector or matrix does not match the expected dimension."""
    pass


class NonFiniteError(TensorEigenError):
    """Raised when a matrix or vector contains NaN or infinite entries."""
    pass


class EigenConvergenceError(TensorEigenError):
    """Raised when the Jacobi eigensolver exhausts its sweep cap."""

    def __init__(self, message, off_diagonal):
        super().__init__(message)
        self.off_diagonal = off_diagonal


class NonUnitVectorError(TensorEigenError):
    """Raised when a vector required to lie on the unit sphere does not."""
    pass


class DegenerateShiftError(TensorEigenError):
    """Raised when lambda + alpha vanishes and the Jacobian is undefined."""
    pass


class RateDomainError(TensorEigenError):
    """Raised when a rate or extrapolation parameter is outside its domain."""
    pass


class InvalidConfigError(TensorEigenError):
    """Raised when a solver configuration is inconsistent with the method."""
    pass


class ResidualPreconditionError(TensorEigenError):
    """Raised when a pair passed as an eigenpair fails the residual test."""
    pass


class InvalidGraphError(TensorEigenError):
    """Raised when a graph has self-loops, duplicate edges or bad indices."""
    pass
