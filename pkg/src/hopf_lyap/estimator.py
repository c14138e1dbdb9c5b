"""Batch-means Lyapunov estimates and the checks built on them."""

from __future__ import annotations

import enum
import itertools
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, NumericalBlowup
from .model import Params, canonicalize, validate
from .sde_sim import SimConfig, FtleSample, derive_seed, simulate

THREADS_ENV = "HOPF_LYAP_THREADS"


class Method(str, enum.Enum):
    CARTESIAN = "cartesian"
    POLAR = "polar"
    FRAME = "frame"

    @classmethod
    def parse(cls, value) -> "Method":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise DomainError(
                f"unknown method {value!r}; choose from {[m.value for m in cls]}") from None


DEFAULT_METHOD = Method.FRAME


def desk_config(seed: int = 0) -> SimConfig:
    """dt = 1e-3, T = 2000 per batch."""
    return SimConfig(dt=1e-3, n_steps=2_000_000, seed=seed)


@dataclass(frozen=True)
class FtleEstimate:
    mean: float
    stderr: float
    n_batches: int
    method: str
    total_steps: int
    reflections_flagged: bool
    values: tuple = field(default=(), repr=False)
    dt: float = float("nan")
    seed: int = 0

    @property
    def ci_low(self) -> float:
        return self.mean - 3.0 * self.stderr

    @property
    def ci_high(self) -> float:
        return self.mean + 3.0 * self.stderr

    def as_dict(self) -> dict:
        return {
            "method": self.method,
            "mean": self.mean,
            "stderr": self.stderr,
            "n_batches": self.n_batches,
            "total_steps": self.total_steps,
            "dt": self.dt,
            "reflections_flagged": self.reflections_flagged,
            "seed": self.seed,
        }


def resolve_threads(threads: int | None = None) -> int:
    """--threads, else $HOPF_LYAP_THREADS, else the CPU count."""
    if threads is None:
        env = os.environ.get(THREADS_ENV)
        if env:
            try:
                threads = int(env)
            except ValueError:
                raise DomainError(f"{THREADS_ENV} must be an integer, got {env!r}") from None
    if threads is None:
        threads = os.cpu_count() or 1
    if threads < 1:
        raise DomainError(f"threads must be >= 1, got {threads}")
    return threads


def batch_seed(master: int, index: int) -> int:
    return derive_seed(master, index)


def run_batches(p: Params, cfg: SimConfig, method, indices, threads=None) -> list[FtleSample]:
    """One trajectory per batch index, seeded from ``(cfg.seed, index)``.

    Results come back in the order of ``indices`` whatever the schedule.
    """
    method = Method.parse(method).value
    indices = list(indices)

    def one(i):
        c = cfg.with_(seed=batch_seed(cfg.seed, i))
        try:
            return simulate(method, p, c)
        except NumericalBlowup as exc:
            raise NumericalBlowup(f"batch {i}: {exc}", batch_index=i) from exc

    n_workers = min(resolve_threads(threads), len(indices)) or 1
    if n_workers == 1:
        return [one(i) for i in indices]
    with ThreadPoolExecutor(max_workers=n_workers) as pool:
        return list(pool.map(one, indices))


def combine(samples, method, seed: int = 0) -> FtleEstimate:
    vals = np.array([s.value for s in samples], dtype=float)
    n = len(vals)
    if n < 2:
        raise DomainError("need at least 2 batches for a standard error")
    mean = math.fsum(vals) / n
    stderr = float(np.std(vals, ddof=1)) / math.sqrt(n)
    steps = sum(s.n_steps for s in samples)
    flagged = any(s.biased for s in samples)
    return FtleEstimate(mean, stderr, n, Method.parse(method).value, steps, flagged,
                        tuple(float(v) for v in vals), samples[0].dt, seed)


def estimate_lyapunov(p: Params, cfg: SimConfig, method=DEFAULT_METHOD, n_batches: int = 16,
                      threads=None) -> FtleEstimate:
    validate(p)
    if int(n_batches) != n_batches or n_batches < 2:
        raise DomainError(f"n_batches must be an integer >= 2, got {n_batches!r}")
    samples = run_batches(p, cfg, method, range(n_batches), threads)
    return combine(samples, method, cfg.seed)


def z_score(e1: FtleEstimate, e2: FtleEstimate) -> float:
    se = math.hypot(e1.stderr, e2.stderr)
    diff = abs(e1.mean - e2.mean)
    if se == 0.0:
        return 0.0 if diff == 0.0 else math.inf
    return diff / se


def _pairwise(estimates: dict) -> dict:
    return {f"{i}_vs_{j}": z_score(estimates[i], estimates[j])
            for i, j in itertools.combinations(estimates, 2)}


@dataclass(frozen=True)
class CrossReport:
    estimates: dict
    z_scores: dict

    @property
    def max_z(self) -> float:
        return max(self.z_scores.values())


def cross_validate(p: Params, cfg: SimConfig, n_batches: int = 16, threads=None,
                   methods=tuple(Method)) -> CrossReport:
    """All methods on the same parameters; pairwise z-scores of their means."""
    est = {Method.parse(m).value: estimate_lyapunov(p, cfg, m, n_batches, threads)
           for m in methods}
    return CrossReport(est, _pairwise(est))


@dataclass(frozen=True)
class OmegaReport:
    omegas: tuple
    estimates: tuple
    max_z: float


def omega_invariance_check(p: Params, cfg: SimConfig, omegas, n_batches: int = 16,
                           method=Method.CARTESIAN, threads=None) -> OmegaReport:
    omegas = tuple(float(w) for w in omegas)
    if len(omegas) < 2:
        raise DomainError("omega_invariance_check needs at least 2 omegas")
    est = tuple(estimate_lyapunov(p.with_(omega=w), cfg, method, n_batches, threads)
                for w in omegas)
    zs = [z_score(x, y) for x, y in itertools.combinations(est, 2)]
    return OmegaReport(omegas, est, max(zs))


def reflection_check(p: Params, cfg: SimConfig, n_batches: int = 16,
                     method=DEFAULT_METHOD, threads=None) -> tuple:
    """(estimate at +|b|, estimate at -|b|, z).  The two runs use different seeds."""
    plus = estimate_lyapunov(p.with_(b=abs(p.b)), cfg, method, n_batches, threads)
    minus = estimate_lyapunov(p.with_(b=-abs(p.b)), cfg.with_(seed=derive_seed(cfg.seed, 1 << 20)),
                              method, n_batches, threads)
    return plus, minus, z_score(plus, minus)


def scaling_check(p: Params, cfg: SimConfig, n_batches: int = 16,
                  method=DEFAULT_METHOD, threads=None) -> tuple:
    """(estimate of p, multiplier * estimate of the canonical form, z).

    The canonical run has time scale multiplier^-1, so its step and horizon
    are rescaled to keep the same number of steps per unit of scaled time.
    """
    cf = canonicalize(p)
    direct = estimate_lyapunov(p, cfg, method, n_batches, threads)
    m = cf.multiplier
    ccfg = cfg.with_(dt=cfg.dt * m, seed=derive_seed(cfg.seed, 1 << 21))
    canon = estimate_lyapunov(cf.params(), ccfg, method, n_batches, threads)
    scaled = FtleEstimate(m * canon.mean, m * canon.stderr, canon.n_batches, canon.method,
                          canon.total_steps, canon.reflections_flagged,
                          tuple(m * v for v in canon.values), canon.dt, canon.seed)
    return direct, scaled, z_score(direct, scaled)
