"""Stability diagram of lambda(mu, 1, b, 1) over the (mu, b) half plane."""

from __future__ import annotations

import csv
import math
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .analytic import c_star, negativity_certificate
from .errors import AmbiguityError, BracketError, DomainError, HopfLyapError
from .estimator import DEFAULT_METHOD, FtleEstimate, Method, combine, resolve_threads, run_batches
from .model import Params
from .sde_sim import SimConfig, derive_seed

CSV_HEADER = ("mu", "b", "lambda", "stderr", "certificate", "ce_reference",
              "seed", "dt", "steps", "batches")
PROVABLY_NEGATIVE = "provably_negative"
NO_CERTIFICATE = "none"

# extra batch doublings allowed at an ambiguous bisection point
MAX_DOUBLINGS = 4


@dataclass(frozen=True)
class GridSpec:
    mu_min: float
    mu_max: float
    mu_steps: int
    b_min: float
    b_max: float
    b_steps: int

    def __post_init__(self):
        if not (self.mu_min <= self.mu_max):
            raise DomainError("mu_min must be <= mu_max")
        if not (0 <= self.b_min <= self.b_max):
            raise DomainError("need 0 <= b_min <= b_max")
        for name in ("mu_steps", "b_steps"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise DomainError(f"{name} must be an integer >= 1, got {v!r}")

    @staticmethod
    def _axis(lo, hi, n):
        return [float(lo)] if n == 1 else [float(x) for x in np.linspace(lo, hi, n)]

    def mus(self) -> list[float]:
        return self._axis(self.mu_min, self.mu_max, self.mu_steps)

    def bs(self) -> list[float]:
        return self._axis(self.b_min, self.b_max, self.b_steps)

    def cells(self) -> list[tuple[float, float]]:
        """Row-major: mu outer, b inner."""
        return [(m, b) for m in self.mus() for b in self.bs()]


@dataclass(frozen=True)
class DiagramPoint:
    mu: float
    b: float
    lambda_hat: float
    stderr: float
    certificate: str
    ce_reference: float
    seed: int = 0
    dt: float = float("nan")
    steps: int = 0
    batches: int = 0
    error: str | None = field(default=None, compare=False)

    @property
    def ok(self) -> bool:
        return self.error is None


def ce_reference(mu: float, b: float) -> float:
    """Signed distance b - mu*sqrt(2 c*) from the large-mu separation line; NaN for mu <= 0."""
    if mu <= 0:
        return float("nan")
    return b - mu * math.sqrt(2.0 * c_star())


def _params(mu: float, b: float) -> Params:
    return Params(mu, 0.0, 1.0, b, 1.0)


def classify(mu: float, b: float) -> str:
    return PROVABLY_NEGATIVE if negativity_certificate(_params(mu, b)) else NO_CERTIFICATE


def _float_key(x: float) -> int:
    return struct.unpack("<Q", struct.pack("<d", float(x)))[0]


def point_seed(master: int, mu: float, b: float) -> int:
    """Seed for the estimate at (mu, b); depends on the values, not on search history."""
    return derive_seed(master, _float_key(mu), _float_key(b))


def scan_grid(grid: GridSpec, cfg: SimConfig, n_batches: int = 16, method=DEFAULT_METHOD,
              threads=None) -> list[DiagramPoint]:
    """One estimate per cell.  Cell k uses seed derive_seed(cfg.seed, k).

    Failures are stored in ``DiagramPoint.error`` with NaN estimates.
    """
    cells = grid.cells()
    method = Method.parse(method)

    def one(k):
        mu, b = cells[k]
        seed = derive_seed(cfg.seed, k)
        c = cfg.with_(seed=seed)
        cert = classify(mu, b)
        ref = ce_reference(mu, b)
        try:
            p = _params(mu, b)
            est = combine(run_batches(p, c, method, range(n_batches), threads=1), method, seed)
            return DiagramPoint(mu, b, est.mean, est.stderr, cert, ref, seed, est.dt,
                                est.total_steps, est.n_batches)
        except HopfLyapError as exc:
            return DiagramPoint(mu, b, float("nan"), float("nan"), cert, ref, seed,
                                cfg.dt, 0, n_batches, error=str(exc))

    n_workers = min(resolve_threads(threads), len(cells))
    if n_workers <= 1:
        return [one(k) for k in range(len(cells))]
    with ThreadPoolExecutor(max_workers=n_workers) as pool:
        return list(pool.map(one, range(len(cells))))


class _Evaluator:
    """Sign estimates at b values, with extendable batch sets."""

    def __init__(self, mu, cfg, n_batches, method, threads):
        self.mu, self.cfg, self.n0 = mu, cfg, n_batches
        self.method, self.threads = method, threads
        self.samples = {}

    def estimate(self, b: float, n: int) -> FtleEstimate:
        have = self.samples.setdefault(b, [])
        if len(have) < n:
            seed = point_seed(self.cfg.seed, self.mu, b)
            c = self.cfg.with_(seed=seed)
            have.extend(run_batches(_params(self.mu, b), c, self.method,
                                    range(len(have), n), self.threads))
        return combine(have[:n], self.method, point_seed(self.cfg.seed, self.mu, b))

    def resolved(self, b: float) -> tuple[FtleEstimate, bool]:
        """Estimate after up to MAX_DOUBLINGS doublings; flag is True if |mean| > 3 stderr."""
        n = self.n0
        est = self.estimate(b, n)
        for _ in range(MAX_DOUBLINGS):
            if abs(est.mean) > 3.0 * est.stderr:
                break
            n *= 2
            est = self.estimate(b, n)
        return est, abs(est.mean) > 3.0 * est.stderr


@dataclass(frozen=True)
class ZeroSearch:
    root: float
    b_lo: float
    b_hi: float
    history: tuple  # (b, mean, stderr, n_batches, resolved) per evaluation
    ambiguous_steps: int


def bisect_zero(mu: float, b_lo: float, b_hi: float, cfg: SimConfig, n_batches: int = 16,
                tol_b: float = 0.25, method=DEFAULT_METHOD, strict: bool = False,
                threads=None) -> ZeroSearch:
    """CI-gated bisection for the b at which lambda(mu, 1, b, 1) changes sign.

    With ``strict`` an unresolved midpoint raises AmbiguityError; otherwise
    the sign of its mean is used and the step is counted in ``ambiguous_steps``.
    """
    if not (0 <= b_lo < b_hi):
        raise DomainError(f"need 0 <= b_lo < b_hi, got [{b_lo}, {b_hi}]")
    if not tol_b > 0:
        raise DomainError(f"tol_b must be > 0, got {tol_b!r}")
    if int(n_batches) != n_batches or n_batches < 2:
        raise DomainError(f"n_batches must be an integer >= 2, got {n_batches!r}")
    ev = _Evaluator(float(mu), cfg, int(n_batches), Method.parse(method), threads)
    hist = []

    def record(b, est, ok):
        hist.append((b, est.mean, est.stderr, est.n_batches, ok))

    lo_est, lo_ok = ev.resolved(b_lo)
    record(b_lo, lo_est, lo_ok)
    hi_est, hi_ok = ev.resolved(b_hi)
    record(b_hi, hi_est, hi_ok)
    if not (lo_ok and hi_ok) or (lo_est.mean > 0) == (hi_est.mean > 0):
        raise BracketError(
            f"bracket [{b_lo}, {b_hi}] at mu={mu} not resolved: "
            f"lambda(b_lo)={lo_est.mean:.4g}+-{lo_est.stderr:.2g}, "
            f"lambda(b_hi)={hi_est.mean:.4g}+-{hi_est.stderr:.2g}")
    lo_positive = lo_est.mean > 0
    lo, hi = float(b_lo), float(b_hi)
    ambiguous = 0
    while hi - lo > tol_b:
        mid = 0.5 * (lo + hi)
        est, ok = ev.resolved(mid)
        record(mid, est, ok)
        if not ok:
            if strict:
                raise AmbiguityError(
                    f"lambda({mu}, 1, {mid}, 1) = {est.mean:.4g} +- {est.stderr:.2g} "
                    f"after {est.n_batches} batches")
            ambiguous += 1
        if (est.mean > 0) == lo_positive:
            lo = mid
        else:
            hi = mid
    return ZeroSearch(0.5 * (lo + hi), lo, hi, tuple(hist), ambiguous)


def find_zero_b(mu: float, b_lo: float, b_hi: float, cfg: SimConfig, n_batches: int = 16,
                tol_b: float = 0.25, **kw) -> float:
    return bisect_zero(mu, b_lo, b_hi, cfg, n_batches, tol_b, **kw).root


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.17g}"


def write_csv(points, path) -> None:
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_HEADER)
            for pt in points:
                w.writerow([_fmt(pt.mu), _fmt(pt.b), _fmt(pt.lambda_hat), _fmt(pt.stderr),
                            pt.certificate, _fmt(pt.ce_reference), str(int(pt.seed)),
                            _fmt(pt.dt), str(int(pt.steps)), str(int(pt.batches))])
    except OSError as exc:
        raise OSError(f"cannot write diagram CSV {path}: {exc}") from exc


def read_csv(path) -> list[DiagramPoint]:
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise OSError(f"cannot read diagram CSV {path}: {exc}") from exc
    if not rows or tuple(rows[0]) != CSV_HEADER:
        raise DomainError(f"{path}: unexpected header {rows[0] if rows else None}")
    out = []
    for r in rows[1:]:
        out.append(DiagramPoint(float(r[0]), float(r[1]), float(r[2]), float(r[3]), r[4],
                                float(r[5]), int(r[6]), float(r[7]), int(r[8]), int(r[9])))
    return out
