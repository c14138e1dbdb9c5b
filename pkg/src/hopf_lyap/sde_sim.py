"""Finite-time Lyapunov exponents by Euler-Maruyama simulation.

Three equivalent descriptions of the same exponent are integrated:

* ``cartesian`` -- the planar SDE together with its linearisation along the
  trajectory; no coordinate singularity, but the Euler step of the fast
  rotation (omega + 2 b r^2) adds a positive O(dt) bias.
* ``polar`` -- the (radius, angle-gap) diffusion, time-averaging Q(r, psi).
* ``frame`` -- the tangent vector expressed in the frame rotating with X.

plus constant-coefficient linear SDEs in the plane driven by one Brownian
motion (used for gamma0 and Psi).

Randomness comes from numpy's counter-based Philox generator.  A trajectory
is a pure function of ``(params, config)``: the seed in the config is the
Philox seed, and batch streams are derived with :func:`derive_seed`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels
from .errors import DomainError, NumericalBlowup
from .model import Params, validate

METHODS = ("cartesian", "polar", "frame")

# fraction of steps with an r_floor reflection above which a sample is flagged
REFLECTION_FLAG_FRACTION = 1e-3


@dataclass(frozen=True)
class SimConfig:
    """Integrator controls.

    ``burn_in_steps`` defaults to 10% of ``n_steps``.  When the step guard
    shrinks ``dt`` the step counts are scaled up so that the averaging
    horizon ``dt * n_steps`` and the burn-in time stay fixed.
    """

    dt: float = 1e-3
    n_steps: int = 2_000_000
    burn_in_steps: int | None = None
    seed: int = 0
    renorm_interval: int = 64
    r_floor: float = 1e-3

    def __post_init__(self):
        if self.burn_in_steps is None:
            object.__setattr__(self, "burn_in_steps", self.n_steps // 10)
        if not (math.isfinite(self.dt) and self.dt > 0):
            raise DomainError(f"dt must be > 0, got {self.dt!r}")
        if int(self.n_steps) != self.n_steps or self.n_steps <= 0:
            raise DomainError(f"n_steps must be a positive integer, got {self.n_steps!r}")
        if int(self.burn_in_steps) != self.burn_in_steps or self.burn_in_steps < 0:
            raise DomainError(f"burn_in_steps must be >= 0, got {self.burn_in_steps!r}")
        if int(self.renorm_interval) != self.renorm_interval or self.renorm_interval <= 0:
            raise DomainError(f"renorm_interval must be > 0, got {self.renorm_interval!r}")
        if not self.r_floor > 0:
            raise DomainError(f"r_floor must be > 0, got {self.r_floor!r}")
        if not 0 <= int(self.seed) < 2**64:
            raise DomainError(f"seed must fit in 64 unsigned bits, got {self.seed!r}")

    @property
    def horizon(self) -> float:
        return self.dt * self.n_steps

    def with_(self, **changes) -> "SimConfig":
        if "n_steps" in changes and "burn_in_steps" not in changes:
            changes["burn_in_steps"] = None
        return replace(self, **changes)

    @classmethod
    def from_horizon(cls, T: float, dt: float = 1e-3, **kw) -> "SimConfig":
        return cls(dt=dt, n_steps=max(1, int(round(T / dt))), **kw)


@dataclass(frozen=True)
class FtleSample:
    value: float
    horizon: float
    seed_used: int
    method: str = ""
    dt: float = float("nan")
    n_steps: int = 0
    reflections: int = 0

    @property
    def biased(self) -> bool:
        """True when reflections at r_floor exceeded 0.1% of steps."""
        return self.reflections > REFLECTION_FLAG_FRACTION * max(self.n_steps, 1)


def derive_seed(master: int, *keys: int) -> int:
    """64-bit seed for the stream identified by ``keys`` under ``master``."""
    ss = np.random.SeedSequence(int(master), spawn_key=tuple(int(k) for k in keys))
    return int(ss.generate_state(1, np.uint64)[0])


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(int(seed)))


def guarded_dt(p: Params, dt: float) -> float:
    """Time step after the static stability guard.

    The angular speed grows like b r^2 and the radial stiffness like 3 a r^2;
    max(1, mu/a + sigma) is a proxy for the typical r^2.
    """
    scale = max(1.0, p.mu / p.a + p.sigma)
    rate = abs(p.omega) + abs(p.b) * scale + 3.0 * p.a * scale
    return min(dt, 0.05 / rate)


def step_plan(p: Params, cfg: SimConfig) -> tuple[float, int, int]:
    """``(dt, n_steps, n_burn)`` actually integrated for ``p``."""
    dt = guarded_dt(p, cfg.dt)
    if dt >= cfg.dt:
        return cfg.dt, int(cfg.n_steps), int(cfg.burn_in_steps)
    n = math.ceil(cfg.horizon / dt)
    dt_eff = cfg.horizon / n
    n_burn = math.ceil(cfg.burn_in_steps * cfg.dt / dt_eff)
    return dt_eff, n, n_burn


def initial_radius(p: Params) -> float:
    return math.sqrt(max(p.mu, 0.0) / p.a) + p.sigma


def _finish(method, status, total, refl, dt, n, cfg) -> FtleSample:
    if status != 0 or not math.isfinite(total):
        raise NumericalBlowup(f"{method} integration blew up (dt={dt:g}); reduce the time step")
    T = dt * n
    return FtleSample(total / T, T, int(cfg.seed), method, dt, n, int(refl))


def simulate_cartesian_ftle(p: Params, cfg: SimConfig) -> FtleSample:
    """Euler-Maruyama on X and its linearisation U; returns log|U_T| / T."""
    validate(p)
    dt, n, n_burn = step_plan(p, cfg)
    total, refl, status = _kernels.cartesian(
        make_rng(cfg.seed), p.mu, p.omega, p.a, p.b, p.sigma,
        dt, n_burn, n, int(cfg.renorm_interval), initial_radius(p))
    return _finish("cartesian", status, total, refl, dt, n, cfg)


def simulate_polar_ftle(p: Params, cfg: SimConfig) -> FtleSample:
    """Time average of Q(r_t, psi_t) along the (r, psi) diffusion."""
    validate(p)
    dt, n, n_burn = step_plan(p, cfg)
    total, refl, status = _kernels.polar(
        make_rng(cfg.seed), p.mu, p.a, p.b, p.sigma,
        dt, n_burn, n, initial_radius(p), 0.5 * math.pi, cfg.r_floor)
    return _finish("polar", status, total, refl, dt, n, cfg)


def simulate_frame_ftle(p: Params, cfg: SimConfig) -> FtleSample:
    """Log-growth of the tangent vector written in the frame rotating with X.

    The (sigma/r) rotation noise is applied exactly (see ``_kernels.frame``).
    """
    validate(p)
    dt, n, n_burn = step_plan(p, cfg)
    total, refl, status = _kernels.frame(
        make_rng(cfg.seed), p.mu, p.a, p.b, p.sigma,
        dt, n_burn, n, int(cfg.renorm_interval), initial_radius(p), cfg.r_floor)
    return _finish("frame", status, total, refl, dt, n, cfg)


_SIMULATORS = {
    "cartesian": simulate_cartesian_ftle,
    "polar": simulate_polar_ftle,
    "frame": simulate_frame_ftle,
}


def simulate(method: str, p: Params, cfg: SimConfig) -> FtleSample:
    try:
        fn = _SIMULATORS[method]
    except KeyError:
        raise DomainError(f"unknown method {method!r}; choose from {METHODS}") from None
    return fn(p, cfg)


def simulate_linear2d_ftle(drift, noise, cfg: SimConfig) -> FtleSample:
    """Top exponent of dY = drift Y dt + noise Y dW (Ito, scalar W) by Euler-Maruyama."""
    drift = np.ascontiguousarray(drift, dtype=float)
    noise = np.ascontiguousarray(noise, dtype=float)
    if drift.shape != (2, 2) or noise.shape != (2, 2):
        raise DomainError("drift and noise must be 2x2 matrices")
    n, n_burn = int(cfg.n_steps), int(cfg.burn_in_steps)
    total, refl, status = _kernels.linear2d(
        make_rng(cfg.seed), drift, noise, cfg.dt, n_burn, n, int(cfg.renorm_interval))
    return _finish("linear2d", status, total, refl, cfg.dt, n, cfg)


def nilpotent_matrices(scale: float = 1.0):
    """(drift, noise) of the nilpotent SDE whose exponent is gamma0.

    With ``scale`` = c the drift is multiplied by c^2 and the noise by c,
    a time change by c^2 that multiplies the exponent by c^2.
    """
    drift = np.array([[0.0, 0.0], [1.0, 0.0]]) * scale**2
    noise = np.array([[0.0, 1.0], [0.0, 0.0]]) * scale
    return drift, noise


def sheared_matrices(zeta: float):
    """(drift, noise) of the sheared SDE whose exponent is Psi(zeta)."""
    if not zeta > 0:
        raise DomainError(f"zeta must be > 0, got {zeta!r}")
    drift = np.array([[-1.0, 0.0], [zeta ** (1.0 / 3.0), 0.0]])
    noise = np.array([[0.0, zeta ** (1.0 / 6.0)], [0.0, 0.0]])
    return drift, noise


def radius_samples(p: Params, cfg: SimConfig, n_samples: int, thin: int = 1000) -> np.ndarray:
    """Radius values from the polar integrator's r-chain, ``thin`` steps apart."""
    validate(p)
    dt, _, n_burn = step_plan(p, cfg)
    return _kernels.polar_radius_path(
        make_rng(cfg.seed), p.mu, p.a, p.sigma, dt, n_burn, int(n_samples), int(thin),
        initial_radius(p), cfg.r_floor)
