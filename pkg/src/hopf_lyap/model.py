"""Parameters of the noisy Hopf normal form and their exact symmetries.

The system is

    dX = ([[mu, -omega], [omega, mu]] X + |X|^2 [[-a, -b], [b, -a]] X) dt + sigma dW

with two independent Brownian motions.  The top Lyapunov exponent does not
depend on ``omega`` or on the sign of ``b``, and a time/space rescaling
reduces the remaining four constants to the pair ``(mu/(sigma sqrt(a)), b/a)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import DomainError


@dataclass(frozen=True)
class Params:
    mu: float
    omega: float
    a: float
    b: float
    sigma: float

    @property
    def twist(self) -> float:
        """Twist factor b/a."""
        return self.b / self.a

    @property
    def reduced_drift(self) -> float:
        """mu / (sigma sqrt(a))."""
        return self.mu / (self.sigma * math.sqrt(self.a))

    def with_(self, **changes) -> "Params":
        return replace(self, **changes)

    def as_tuple(self) -> tuple:
        return (self.mu, self.omega, self.a, self.b, self.sigma)


@dataclass(frozen=True)
class CanonicalForm:
    mu_hat: float
    b_hat: float
    multiplier: float

    def params(self) -> Params:
        """Representative ``(mu_hat, 0, 1, b_hat, 1)`` of the equivalence class."""
        return Params(self.mu_hat, 0.0, 1.0, self.b_hat, 1.0)


def validate(p: Params) -> Params:
    for name in ("mu", "omega", "a", "b", "sigma"):
        value = getattr(p, name)
        if not math.isfinite(value):
            raise DomainError(f"{name} must be finite, got {value!r}")
    if not p.a > 0:
        raise DomainError(f"a must be > 0 for recurrence, got {p.a!r}")
    if not p.sigma > 0:
        raise DomainError(f"sigma must be > 0, got {p.sigma!r}")
    return p


def q_integrand(r, psi, p: Params):
    """Furstenberg-Khasminskii integrand Q(r, psi).

    ``psi`` is the angle between the tangent vector and the position vector;
    Q is pi-periodic in it.  Accepts scalars or numpy arrays.
    """
    r2 = np.square(r)
    c = np.cos(psi)
    return p.mu - p.a * r2 + 2.0 * r2 * c * (p.b * np.sin(psi) - p.a * c)


def q_integrand_double_angle(r, psi, p: Params):
    """Same as :func:`q_integrand`, written with 2*psi (the form used by the kernels)."""
    r2 = np.square(r)
    return p.mu - 2.0 * p.a * r2 + r2 * (p.b * np.sin(2.0 * psi) - p.a * np.cos(2.0 * psi))


def q_bounds(r, p: Params):
    """Sharp pointwise bounds ``(lower, upper)`` of Q over psi at radius r."""
    r2 = np.square(r)
    h = math.hypot(p.a, p.b)
    return p.mu - (h + 2.0 * p.a) * r2, p.mu + (h - 2.0 * p.a) * r2


def canonicalize(p: Params) -> CanonicalForm:
    validate(p)
    mult = p.sigma * math.sqrt(p.a)
    return CanonicalForm(mu_hat=p.mu / mult, b_hat=abs(p.b) / p.a, multiplier=mult)


def rescale(p: Params, A: float, B: float) -> tuple[Params, float]:
    """Time rescaling by A and space rescaling by B.

    Returns ``(q, m)`` with ``lambda(p) == m * lambda(q)``.  The rotation rate
    is carried along with the time change although the exponent ignores it.
    """
    if not (A > 0 and B > 0):
        raise DomainError(f"rescale needs A > 0 and B > 0, got A={A!r}, B={B!r}")
    q = Params(
        mu=A * p.mu,
        omega=A * p.omega,
        a=A * p.a / B**2,
        b=A * p.b / B**2,
        sigma=math.sqrt(A) * B * p.sigma,
    )
    return q, 1.0 / A
