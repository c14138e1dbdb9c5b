"""Closed-form and quadrature-based quantities for the noisy Hopf normal form.

Everything here is deterministic: the invariant law of the radius, the
negativity bound J and its threshold Jhat, the exponent Psi of the canonical
sheared linear SDE with its root c*, the constant gamma0, the shear function
Phi and the three asymptotic predictors of the Lyapunov exponent.

Ratios of the form exp(-z^2)/erfc(-z) are always routed through erfcx so that
large |mu|/sigma does not overflow.
"""

from __future__ import annotations

import logging
import math
import threading
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize, special

from .errors import DomainError, QuadratureFailure
from .model import Params, validate

log = logging.getLogger(__name__)

SQRT_PI = math.sqrt(math.pi)

# Gamma(1/3) to 20 significant digits, from the elliptic-integral identity
#   Gamma(1/3)^3 = 2^(7/3) pi K / 3^(1/4),  K = pi / (2 AGM(1, cos(pi/12)))
# (complete elliptic integral of modulus sin(pi/12)) in 30-digit arithmetic.
GAMMA_ONE_THIRD = 2.6789385347077476337

# Below this z the erfcx ratios lose digits to cancellation; switch to the
# continued fraction of erfc.
_CF_SWITCH = -5.0
_CF_TERMS = 80


def erfcx_scaled(x):
    """exp(x^2) erfc(x).

    Overflows to ``inf`` for x below about -26.6 (the true value exceeds the
    double range there); callers only ever use its reciprocal in that regime.
    """
    return special.erfcx(x)


def _erfc_cf_tail(w):
    """Tail t(w) of the continued fraction sqrt(pi) erfcx(w) = 1/(w + t(w)).

    t(w) = (1/2)/(w + 1/(w + (3/2)/(w + 2/(w + ...)))); accurate to machine
    precision for w >= 5 with the fixed depth used here.
    """
    t = 0.0
    for k in range(_CF_TERMS, 0, -1):
        t = 0.5 * k / (w + t)
    return t


def _shift_terms(z: float) -> tuple[float, float]:
    """Return ``(D, M)`` with D = 1 + sqrt(pi) z erfcx(-z), M = z + 1/(sqrt(pi) erfcx(-z)).

    Both are positive for every real z and are evaluated without cancellation.
    """
    if z < _CF_SWITCH:
        w = -z
        t = _erfc_cf_tail(w)
        return t / (w + t), t
    e = special.erfcx(-z)
    if math.isinf(e):
        return math.inf, z
    return 1.0 + SQRT_PI * z * e, z + 1.0 / (SQRT_PI * e)


def _log_erfc(x: float) -> float:
    if x > 0:
        return math.log(special.erfcx(x)) - x * x
    return math.log(special.erfc(x))


@dataclass(frozen=True)
class DensityModel:
    """Stationary law of the radius r.

    In the variable s = r^2 it is a normal law with mean mu/a and variance
    sigma^2/a, truncated to s > 0.  ``log_normalizer`` is
    log(sqrt(pi sigma^2 / 2a) erfc(-z)) with z = ``z_param``.
    """

    mu: float
    a: float
    sigma: float
    z_param: float
    log_normalizer: float

    @classmethod
    def of(cls, mu: float, a: float, sigma: float) -> "DensityModel":
        if not (a > 0 and sigma > 0) or not math.isfinite(mu):
            raise DomainError(f"density needs finite mu, a > 0, sigma > 0; got {(mu, a, sigma)}")
        z = mu / (sigma * math.sqrt(2.0 * a))
        lognorm = 0.5 * math.log(math.pi * sigma**2 / (2.0 * a)) + _log_erfc(-z)
        return cls(mu, a, sigma, z, lognorm)

    @classmethod
    def from_params(cls, p: Params) -> "DensityModel":
        return cls.of(p.mu, p.a, p.sigma)

    @property
    def s_mean(self) -> float:
        return self.mu / self.a

    @property
    def s_sd(self) -> float:
        return self.sigma / math.sqrt(self.a)

    def log_density_s(self, s):
        """Log density of s = r^2 (vectorised)."""
        s = np.asarray(s, dtype=float)
        m, v = self.s_mean, self.s_sd**2
        # -(s-m)^2/2v written as -s(s-2m)/2v - z^2 so the z^2 can cancel
        # against the normalizer when mu << 0.
        z2 = self.z_param**2
        if self.z_param < 0:
            lognorm_shift = self.log_normalizer + z2
            return -s * (s - 2.0 * m) / (2.0 * v) - lognorm_shift
        return -((s - m) ** 2) / (2.0 * v) - self.log_normalizer


def rho(model: DensityModel, r):
    """Density of the radius at r > 0 (vectorised)."""
    r = np.asarray(r, dtype=float)
    out = 2.0 * r * np.exp(model.log_density_s(r * r))
    return out if out.ndim else float(out)


def rho_cdf(model: DensityModel, r):
    """Distribution function of the radius (closed form via erfc)."""
    r = np.asarray(r, dtype=float)
    m, sd = model.s_mean, model.s_sd
    # P(s <= x) for the truncated normal = 1 - erfc((x-m)/(sd sqrt2)) / erfc(-m/(sd sqrt2))
    x = (r * r - m) / (sd * math.sqrt(2.0))
    z = model.z_param
    tail = np.where(
        x > 0,
        special.erfcx(x) * np.exp(-x * x - _log_erfc(-z)),
        np.exp(np.log(special.erfc(x)) - _log_erfc(-z)),
    )
    out = 1.0 - tail
    return out if out.ndim else float(out)


def _s_window(model: DensityModel) -> tuple[float, float]:
    """Interval of s carrying all but ~exp(-60) of the mass."""
    m, sd = model.s_mean, model.s_sd
    if m >= 0:
        return max(0.0, m - 12.0 * sd), m + 12.0 * sd
    # for m < 0 the law decays at least like exp(-s|m|/sd^2) and exp(-s^2/2sd^2)
    return 0.0, min(12.0 * sd, 60.0 * sd * sd / -m)


def expectation_s(model: DensityModel, func, power: float = 0.0, tol: float = 1e-10) -> float:
    """Integral of ``s**power * func(s)`` against the law of s = r^2.

    ``func`` must be smooth on the support; an algebraic singularity at s = 0
    is handled through ``power`` (power > -1 required).
    """
    lo, hi = _s_window(model)
    m = model.s_mean

    def g(s):
        return func(s) * math.exp(model.log_density_s(s))

    if lo == 0.0 and power != 0.0:
        val, err = integrate.quad(g, 0.0, hi, weight="alg", wvar=(power, 0.0),
                                  epsabs=1e-14, epsrel=tol / 10, limit=400)
    else:
        pts = [m] if lo < m < hi else None
        val, err = integrate.quad(lambda s: s**power * g(s), lo, hi, points=pts,
                                  epsabs=1e-14, epsrel=tol / 10, limit=400)
    if not err <= tol * (1.0 + abs(val)):
        raise QuadratureFailure(f"moment quadrature error {err:.3g} exceeds {tol:g}")
    return val


def moment(model: DensityModel, kappa: float) -> float:
    """Integral of r^kappa against the stationary radius law (kappa > -2)."""
    if not kappa > -2:
        raise DomainError(f"moment of order {kappa} diverges; need kappa > -2")
    return expectation_s(model, lambda s: 1.0, power=kappa / 2.0)


def moment_r2_closed(model: DensityModel) -> float:
    """Exact E[r^2] = mu/a + sqrt(2 sigma^2 / (pi a)) exp(-z^2)/erfc(-z)."""
    _, m_term = _shift_terms(model.z_param)
    return model.sigma * math.sqrt(2.0 / model.a) * m_term


def bound_J(z: float, b_ratio: float) -> float:
    """J(z, b); lambda < sqrt(2 a sigma^2) J(mu/sqrt(2 a sigma^2), b/a)."""
    _, m_term = _shift_terms(z)
    return z + (math.sqrt(1.0 + b_ratio * b_ratio) - 2.0) * m_term


def jhat(z: float) -> float:
    """Largest |b| with J(z, b) <= 0; strictly decreasing in z."""
    d, _ = _shift_terms(z)
    k = 1.0 / d
    return math.sqrt(k * (k + 2.0))


def negativity_certificate(p: Params) -> bool:
    """True when |b| <= a Jhat(mu / (sigma sqrt(2a))), which proves lambda < 0."""
    validate(p)
    return abs(p.b) <= p.a * jhat(p.mu / (p.sigma * math.sqrt(2.0 * p.a)))


def upper_bound_lambda(p: Params) -> float:
    """Rigorous upper bound mu + (sqrt(a^2+b^2) - 2a) E[r^2] on the exponent."""
    validate(p)
    s = math.sqrt(2.0 * p.a) * p.sigma
    return s * bound_J(p.mu / s, abs(p.b) / p.a)


# ---------------------------------------------------------------------------
# Psi(zeta) and c*
# ---------------------------------------------------------------------------

_EXP_DROP = 745.0
# Small-zeta expansion of Psi (Laplace's method at u = 1).  The series is
# asymptotic with fast-growing coefficients (the next one is -1105/16), so the
# cross-check tolerance is a multiple of the first omitted term.
_LAPLACE_COEFFS = (-0.5, -1.25, -7.5)
_LAPLACE_NEXT = 1105.0 / 16.0


@dataclass(frozen=True)
class PsiInput:
    zeta: float

    def __post_init__(self):
        if not (math.isfinite(self.zeta) and self.zeta > 0):
            raise DomainError(f"zeta must be finite and > 0, got {self.zeta!r}")


def _psi_log_weight(u, zeta):
    # -(u^3/6 - u/2)/zeta shifted by its maximum 1/(3 zeta) at u = 1:
    # u^3/6 - u/2 + 1/3 = (u-1)^2 (u+2)/6
    return -((u - 1.0) ** 2) * (u + 2.0) / (6.0 * zeta)


def _level_point(level, zeta, lo, hi):
    """u in (lo, hi) where the shifted log-weight equals -level (monotone branch)."""
    f = lambda u: _psi_log_weight(u, zeta) + level
    return optimize.brentq(f, lo, hi, xtol=1e-14, rtol=1e-14)


def psi_laplace(zeta: float) -> float:
    """Three-term small-zeta expansion of Psi; a cross-check only."""
    return sum(c * zeta ** (k + 1) for k, c in enumerate(_LAPLACE_COEFFS))


def psi_big(zeta, tol: float = 1e-10) -> float:
    """Lyapunov exponent Psi(zeta) of dY = [[-1,0],[zeta^(1/3),0]]Y dt + [[0,zeta^(1/6)],[0,0]]Y dW.

    Evaluated as (1/2)(I(1/2)/I(-1/2) - 1), I(p) = int_0^inf u^p exp(-(u^3/6 - u/2)/zeta) du.
    With u = t^2 both integrands are smooth; the weight is shifted by its
    maximum and dropped where it is below exp(-745).
    """
    if isinstance(zeta, PsiInput):
        zeta = zeta.zeta
    PsiInput(zeta)

    # upper truncation: (u-1)^2 (u+2) = 6*745*zeta on u > 1
    u_hi = 1.0 + 1.0
    while _psi_log_weight(u_hi, zeta) > -_EXP_DROP:
        u_hi *= 2.0
    u_hi = _level_point(_EXP_DROP, zeta, 1.0, u_hi)
    u_lo = 0.0
    if _psi_log_weight(0.0, zeta) < -_EXP_DROP:
        u_lo = _level_point(_EXP_DROP, zeta, 0.0, 1.0)

    # breakpoints where the weight has decayed by e^-1, e^-10, e^-40 help quad
    # find the peak when zeta is small and the tail when it is large
    right = [_level_point(L, zeta, 1.0, u_hi) for L in (1.0, 10.0, 40.0) if L < _EXP_DROP]
    left = []
    for L in (1.0, 10.0, 40.0):
        if _psi_log_weight(max(u_lo, 0.0), zeta) < -L:
            left.append(_level_point(L, zeta, u_lo, 1.0))
    t_lo, t_hi = math.sqrt(u_lo), math.sqrt(u_hi)
    pts = sorted({math.sqrt(u) for u in left + [1.0] + right if u_lo < u < u_hi})

    def integral(p2):
        # int t^(2p+1) * 2 dt form: u^p du = 2 t^(2p+1) dt
        f = lambda t: 2.0 * t**p2 * math.exp(_psi_log_weight(t * t, zeta))
        total, err_total = 0.0, 0.0
        edges = [t_lo] + pts + [t_hi]
        for a_, b_ in zip(edges[:-1], edges[1:]):
            v, e = integrate.quad(f, a_, b_, epsabs=0.0, epsrel=tol / 100, limit=200)
            total += v
            err_total += e
        if not err_total <= tol * abs(total):
            raise QuadratureFailure(f"Psi({zeta}) quadrature error {err_total:.3g} too large")
        return total

    num = integral(2)  # u^(1/2) du = 2 t^2 dt
    den = integral(0)  # u^(-1/2) du = 2 dt
    value = 0.5 * (num / den - 1.0)

    if zeta < 0.05:
        approx = psi_laplace(zeta)
        if abs(value - approx) > 5.0 * _LAPLACE_NEXT * zeta**4:
            log.warning("Psi(%g): quadrature %.12g disagrees with Laplace %.12g", zeta, value, approx)
    return value


_cstar_lock = threading.Lock()
_cstar_value: float | None = None


def c_star() -> float:
    """The unique zero of Psi (about 3.542), computed once and cached."""
    global _cstar_value
    if _cstar_value is None:
        with _cstar_lock:
            if _cstar_value is None:
                _cstar_value = optimize.brentq(psi_big, 1.0, 10.0, xtol=1e-12, rtol=1e-14)
    return _cstar_value


def gamma0() -> float:
    """Lyapunov exponent of dY = [[0,0],[1,0]]Y dt + [[0,1],[0,0]]Y dW."""
    return math.pi / (2.0 ** (1.0 / 3.0) * 3.0 ** (1.0 / 6.0) * GAMMA_ONE_THIRD**2)


def phi_shear(w):
    """Phi(w) = w/(1+w^2) - w^2 (1-w^2) / (2 (1+w^2)^2), with Phi(+-inf) = 1/2."""
    w = float(w)
    if abs(w) <= 1.0:
        w2 = w * w
        return w / (1.0 + w2) - w2 * (1.0 - w2) / (2.0 * (1.0 + w2) ** 2)
    t = 1.0 / w  # exact 0.0 for w = +-inf
    t2 = t * t
    return t / (1.0 + t2) - (t2 - 1.0) / (2.0 * (1.0 + t2) ** 2)


# ---------------------------------------------------------------------------
# asymptotic predictors
# ---------------------------------------------------------------------------

def predict_large_b(p: Params) -> float:
    """(2 b sigma)^(2/3) gamma0 E[r^(2/3)]: leading behaviour as b -> infinity."""
    validate(p)
    if p.b == 0:
        raise DomainError("large-b prediction needs b != 0")
    m = moment(DensityModel.from_params(p), 2.0 / 3.0)
    return (2.0 * abs(p.b) * p.sigma) ** (2.0 / 3.0) * gamma0() * m


def predict_small_sigma(p: Params) -> float:
    """-(a^2 + b^2) sigma^2 / (2 mu a), valid to O(sigma^4) for mu > 0."""
    validate(p)
    if not p.mu > 0:
        raise DomainError(f"small-sigma prediction needs mu > 0, got {p.mu}")
    return -(p.a**2 + p.b**2) * p.sigma**2 / (2.0 * p.mu * p.a)


def ce_zeta(p: Params) -> float:
    return p.b**2 * p.sigma**2 / (2.0 * p.mu**2 * p.a)


def predict_ce(p: Params) -> float:
    """2 mu Psi(b^2 sigma^2 / (2 mu^2 a)): small noise with b sigma held fixed."""
    validate(p)
    if not p.mu > 0:
        raise DomainError(f"CE prediction needs mu > 0, got {p.mu}")
    if p.b == 0:
        # Psi(zeta) -> 0 as zeta -> 0
        return 0.0
    return 2.0 * p.mu * psi_big(ce_zeta(p))
