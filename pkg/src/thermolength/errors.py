"""Exception hierarchy shared by all modules."""


class ThermolengthError(Exception):
    """Base class for every error raised by this package."""


class DomainError(ThermolengthError, ValueError):
    """An argument lies outside the mathematical domain of a function."""


class InvalidParamsError(DomainError):
    """Physical constants violate positivity."""


class InvalidProtocolError(DomainError):
    """A driving protocol is malformed or does not match its endpoints."""


class IntegrationError(ThermolengthError, ArithmeticError):
    """The adaptive integrator failed (e.g. step-size underflow)."""


class InvalidStateError(DomainError):
    """A covariance matrix is unphysical (violates the uncertainty relation)."""


class GridError(ThermolengthError, ValueError):
    """A position grid does not cover or resolve the states sampled on it."""


class ResolutionError(GridError):
    """Harmonic eigenfunctions are not resolved by the grid."""


class NumericError(ThermolengthError, ArithmeticError):
    """A numerical routine (eigensolver, quadrature) failed or lost accuracy."""
