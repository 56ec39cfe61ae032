"""Exception types raised by bayestps."""


class BayesTPSError(Exception):
    """Base class for all package errors."""


class ValidationError(BayesTPSError, ValueError):
    """Invalid configuration or input, detected before any heavy computation."""


class BasisError(ValidationError):
    """Invalid B-spline basis request (e.g. fewer than 4 basis functions)."""


class DomainError(ValidationError):
    """Coordinate outside the unit interval."""

    def __init__(self, message, row=None):
        super().__init__(message)
        self.row = row


class ScalingError(BayesTPSError, RuntimeError):
    """Prior scaling could not find a rate for the requested target."""


class NumericalBreakdown(BayesTPSError, ArithmeticError):
    """A factorization failed even after jitter escalation."""

    def __init__(self, message, iteration=None, **context):
        super().__init__(message)
        self.iteration = iteration
        self.context = context


class DegenerateFit(NumericalBreakdown):
    """Residual sum of squares is exactly zero; sigma^2 has no proper conditional."""


class InsufficientSamples(BayesTPSError, ValueError):
    """Too few posterior draws for the requested summary."""
