"""Exception types raised across the package."""


class HopfLyapError(Exception):
    """Base class for all package errors."""


class DomainError(HopfLyapError, ValueError):
    """A parameter or argument lies outside its admissible domain."""


class NumericalBlowup(HopfLyapError, FloatingPointError):
    """A simulated state became non-finite (usually: time step too large)."""

    def __init__(self, message, batch_index=None):
        super().__init__(message)
        self.batch_index = batch_index


class QuadratureFailure(HopfLyapError, ArithmeticError):
    """Adaptive quadrature did not reach the requested tolerance."""


class BracketError(HopfLyapError):
    """Endpoint signs of a stochastic bisection could not be resolved."""


class AmbiguityError(HopfLyapError):
    """A bisection midpoint stayed statistically indistinguishable from zero."""
