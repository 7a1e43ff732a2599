"""Exception hierarchy shared by every module."""


class VgcError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(VgcError, ValueError):
    """An argument lies outside the domain of a special function."""


class SupportError(VgcError, ValueError):
    """A point lies outside the support of a model or transform."""


class RangeError(SupportError):
    """A value lies outside the range of a monotone transform."""


class ParameterError(VgcError, ValueError):
    """Invalid model or configuration parameter."""


class InvariantError(VgcError, ValueError):
    """A structural invariant (simplex weights, triangular factor) is violated."""


class VariantError(VgcError, TypeError):
    """Operation not defined for this transform variant."""


class DerivativeOverflowError(VgcError, ArithmeticError):
    """A transform derivative under- or overflowed."""

    def __init__(self, message, z=None):
        super().__init__(message)
        self.z = z


class SingularFactorError(VgcError, ArithmeticError):
    """A Cholesky diagonal entry fell below the positivity floor."""


class OptimizationAborted(VgcError, RuntimeError):
    """Too many consecutive rejected Monte Carlo samples."""


class ConvergenceError(VgcError, RuntimeError):
    """An iterative routine (fixed point, line search, quadrature) failed."""
