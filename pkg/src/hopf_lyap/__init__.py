"""Lyapunov exponents of the stochastic Hopf normal form.

    dX = (mu X - a|X|^2 X) dt + (omega + b|X|^2) J X dt + sigma dW

with estimates by simulation in three coordinate systems, closed-form
bounds and asymptotic predictors, and stability-diagram tools.
"""

from .errors import (AmbiguityError, BracketError, DomainError, HopfLyapError,
                     NumericalBlowup, QuadratureFailure)
from .model import CanonicalForm, Params, canonicalize, rescale, validate
from .sde_sim import FtleSample, SimConfig
from .estimator import FtleEstimate, Method, estimate_lyapunov

__version__ = "0.1.0"

__all__ = [
    "AmbiguityError", "BracketError", "CanonicalForm", "DomainError", "FtleEstimate",
    "FtleSample", "HopfLyapError", "Method", "NumericalBlowup", "Params",
    "QuadratureFailure", "SimConfig", "canonicalize", "estimate_lyapunov", "rescale",
    "validate",
]
