"""Command-line interface: ``hopf-lyap <command> [flags]``.

Results go to standard output (JSON) or to the file named by ``--out``;
progress goes to standard error.  Every file written is accompanied by a
``<file>.manifest.json`` recording the command, the effective parameters,
the seed and the tool version.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time

import numpy as np

from . import __version__
from . import acceptance
from . import analytic as an
from .diagram import GridSpec, bisect_zero, scan_grid, write_csv
from .errors import DomainError, HopfLyapError
from .estimator import Method, cross_validate, estimate_lyapunov, resolve_threads
from .model import Params, validate
from .sde_sim import SimConfig

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2

DESK = {"dt": 1e-3, "steps": 2_000_000, "burn_in": None, "batches": 16, "seed": 0,
        "method": Method.FRAME.value, "renorm": 64, "r_floor": 1e-3}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _sim_flags(p, method_choices=("cartesian", "polar", "frame")):
    g = p.add_argument_group("simulation")
    g.add_argument("--method", choices=method_choices)
    g.add_argument("--dt", type=float)
    g.add_argument("--steps", type=int, help="post burn-in steps per batch")
    g.add_argument("--burn-in", type=int, help="burn-in steps (default 10%% of --steps)")
    g.add_argument("--batches", type=int)
    g.add_argument("--seed", type=int)
    g.add_argument("--renorm", type=int, help="steps between tangent renormalizations")
    g.add_argument("--r-floor", type=float)


def _common(p):
    p.add_argument("--config", help="JSON file of flag defaults (keys as flag names)")
    p.add_argument("--threads", type=int, help="worker cap (fallback: $HOPF_LYAP_THREADS)")
    p.add_argument("--out", help="write the result here instead of standard output")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="hopf-lyap", description="Lyapunov exponents of the noisy Hopf normal form")
    ap.add_argument("--version", action="version", version=f"hopf-lyap {__version__}")
    sub = ap.add_subparsers(dest="command", parser_class=_Parser)

    def model_flags(p, names=("mu", "omega", "a", "b", "sigma")):
        for n in names:
            p.add_argument(f"--{n}", type=float)

    p = sub.add_parser("lyapunov", help="Monte Carlo estimate of the top exponent")
    model_flags(p)
    _sim_flags(p, ("cartesian", "polar", "frame", "all"))
    _common(p)

    p = sub.add_parser("density", help="stationary radial density on a grid (CSV)")
    model_flags(p, ("mu", "a", "sigma"))
    p.add_argument("--r-max", type=float)
    p.add_argument("--points", type=int)
    _common(p)

    p = sub.add_parser("bounds", help="negativity threshold and upper bound")
    model_flags(p, ("mu", "a", "b", "sigma"))
    _common(p)

    p = sub.add_parser("psi", help="exponent of the sheared linear SDE")
    p.add_argument("--zeta", type=float)
    p.add_argument("--scan", type=float, nargs=3, metavar=("ZMIN", "ZMAX", "N"))
    _common(p)

    p = sub.add_parser("cstar", help="sign change of psi")
    _common(p)

    p = sub.add_parser("predict", help="asymptotic predictions of the exponent")
    model_flags(p, ("mu", "a", "b", "sigma"))
    p.add_argument("--regime", choices=("large-b", "small-sigma", "ce"))
    _common(p)

    p = sub.add_parser("diagram", help="grid of estimates at a = sigma = 1 (CSV)")
    for n in ("mu-min", "mu-max", "b-min", "b-max"):
        p.add_argument(f"--{n}", type=float)
    p.add_argument("--mu-steps", type=int)
    p.add_argument("--b-steps", type=int)
    _sim_flags(p)
    _common(p)

    p = sub.add_parser("zero", help="b where lambda(mu, 1, b, 1) changes sign")
    p.add_argument("--mu", type=float)
    p.add_argument("--b-lo", type=float)
    p.add_argument("--b-hi", type=float)
    p.add_argument("--tol", type=float)
    p.add_argument("--strict", action="store_true", default=None,
                   help="fail instead of guessing at unresolved midpoints")
    _sim_flags(p)
    _common(p)

    p = sub.add_parser("verify", help="run an acceptance suite")
    p.add_argument("--suite", choices=sorted(acceptance.SUITES))
    p.add_argument("--seed", type=int)
    _common(p)
    return ap


DEFAULTS = {
    "lyapunov": dict(DESK, omega=0.0),
    "density": {"r_max": None, "points": 200},
    "bounds": {"b": 0.0},
    "psi": {},
    "cstar": {},
    "predict": {},
    "diagram": dict(DESK),
    "zero": dict(DESK, tol=0.25, strict=False),
    "verify": {"suite": "quick", "seed": 0},
}

REQUIRED = {
    "lyapunov": ("mu", "a", "b", "sigma"),
    "density": ("mu", "a", "sigma"),
    "bounds": ("mu", "a", "sigma"),
    "predict": ("mu", "a", "b", "sigma"),
    "diagram": ("mu_min", "mu_max", "mu_steps", "b_min", "b_max", "b_steps", "out"),
    "zero": ("mu", "b_lo", "b_hi"),
}


def _flag(key: str) -> str:
    return "--" + key.replace("_", "-")


def resolve(ns: argparse.Namespace) -> dict:
    """flags > --config file > built-in defaults."""
    cfg = dict(DEFAULTS.get(ns.command, {}))
    if getattr(ns, "config", None):
        try:
            with open(ns.config, encoding="utf-8") as fh:
                loaded = json.load(fh)
        except (OSError, ValueError) as exc:
            raise UsageError(f"--config {ns.config}: {exc}") from None
        if not isinstance(loaded, dict):
            raise UsageError(f"--config {ns.config}: expected a JSON object")
        known = set(vars(ns))
        for k, v in loaded.items():
            k = k.replace("-", "_")
            if k not in known or k in ("command", "config"):
                raise UsageError(f"--config {ns.config}: unknown key {k!r}")
            cfg[k] = v
    for k, v in vars(ns).items():
        if k in ("command", "config"):
            continue
        if v is not None:
            cfg[k] = v
        else:
            cfg.setdefault(k, None)
    for k in REQUIRED.get(ns.command, ()):
        if cfg.get(k) is None:
            raise UsageError(f"missing required flag {_flag(k)}")
    return cfg


def _check_model(c: dict, fields=("mu", "omega", "a", "b", "sigma")) -> Params:
    full = {"mu": 0.0, "omega": 0.0, "a": 1.0, "b": 0.0, "sigma": 1.0}
    full.update({k: float(c[k]) for k in fields if c.get(k) is not None})
    try:
        return validate(Params(**full))
    except DomainError as exc:
        raise UsageError(f"--{str(exc).split()[0]}: {exc}") from None


_SIM_FLAGS = {"n_steps": "--steps", "burn_in_steps": "--burn-in", "renorm_interval": "--renorm"}


def _sim_config(c: dict) -> SimConfig:
    try:
        return SimConfig(dt=float(c["dt"]), n_steps=int(c["steps"]),
                         burn_in_steps=None if c.get("burn_in") is None else int(c["burn_in"]),
                         seed=int(c["seed"]), renorm_interval=int(c["renorm"]),
                         r_floor=float(c["r_floor"]))
    except DomainError as exc:
        field = str(exc).split()[0]
        raise UsageError(f"{_SIM_FLAGS.get(field, _flag(field))}: {exc}") from None


def _batches(c: dict) -> int:
    n = int(c["batches"])
    if n < 2:
        raise UsageError("--batches must be >= 2")
    return n


def _threads(c: dict):
    try:
        return resolve_threads(c.get("threads"))
    except DomainError as exc:
        raise UsageError(str(exc)) from None


def _num(x):
    """JSON-safe number: NaN and infinities become null."""
    if x is None:
        return None
    x = float(x)
    return x if math.isfinite(x) else None


# ---------------------------------------------------------------- commands

def cmd_lyapunov(c):
    p = _check_model(c)
    cfg = _sim_config(c)
    n = _batches(c)
    threads = _threads(c)
    out = {"mu": p.mu, "omega": p.omega, "a": p.a, "b": p.b, "sigma": p.sigma,
           "seed": cfg.seed}
    if c["method"] == "all":
        rep = cross_validate(p, cfg, n, threads)
        for name, e in rep.estimates.items():
            out[f"{name}_mean"] = e.mean
            out[f"{name}_stderr"] = e.stderr
            out[f"{name}_dt"] = e.dt
            out[f"{name}_total_steps"] = e.total_steps
            out[f"{name}_reflections_flagged"] = e.reflections_flagged
        for name, z in rep.z_scores.items():
            out[f"z_{name}"] = z
        out["n_batches"] = n
    else:
        e = estimate_lyapunov(p, cfg, c["method"], n, threads)
        out.update(e.as_dict())
    return out


def cmd_density(c):
    p = _check_model(c, ("mu", "a", "sigma"))
    m = an.DensityModel.of(p.mu, p.a, p.sigma)
    r_max = c.get("r_max")
    if r_max is None:
        r_max = math.sqrt(m.s_mean + 8 * m.s_sd) if m.s_mean > 0 else math.sqrt(8 * m.s_sd)
    n = int(c["points"])
    if not r_max > 0:
        raise UsageError("--r-max must be > 0")
    if n < 1:
        raise UsageError("--points must be >= 1")
    r = np.linspace(r_max / n, r_max, n)
    rows = ["r,rho"] + [f"{x:.17g},{y:.17g}" for x, y in zip(r, an.rho(m, r))]
    return "\n".join(rows) + "\n"


def cmd_bounds(c):
    p = _check_model(c, ("mu", "a", "b", "sigma"))
    z = p.mu / (p.sigma * math.sqrt(2 * p.a))
    return {"mu": p.mu, "a": p.a, "b": p.b, "sigma": p.sigma, "z": z,
            "jhat_threshold_b": p.a * an.jhat(z),
            "j_value_at_b": an.bound_J(z, abs(p.b) / p.a),
            "lambda_upper_bound": an.upper_bound_lambda(p),
            "certificate": an.negativity_certificate(p)}


def cmd_psi(c):
    if (c.get("zeta") is None) == (c.get("scan") is None):
        raise UsageError("give exactly one of --zeta or --scan")
    if c.get("zeta") is not None:
        if not c["zeta"] > 0:
            raise UsageError("--zeta must be > 0")
        return {"zeta": c["zeta"], "psi": an.psi_big(c["zeta"])}
    lo, hi, n = c["scan"]
    if not (0 < lo <= hi) or int(n) != n or n < 1:
        raise UsageError("--scan needs 0 < ZMIN <= ZMAX and an integer N >= 1")
    zs = [float(z) for z in np.linspace(lo, hi, int(n))]
    return {"zeta": zs, "psi": [an.psi_big(z) for z in zs]}


def cmd_cstar(c):
    return {"c_star": an.c_star()}


_PREDICTORS = {"large-b": an.predict_large_b, "small-sigma": an.predict_small_sigma,
               "ce": an.predict_ce}


def cmd_predict(c):
    p = _check_model(c, ("mu", "a", "b", "sigma"))
    out = {"mu": p.mu, "a": p.a, "b": p.b, "sigma": p.sigma}
    if c.get("regime"):
        try:
            out["prediction"] = _PREDICTORS[c["regime"]](p)
        except DomainError as exc:
            raise UsageError(f"--regime {c['regime']}: {exc}") from None
        out["regime"] = c["regime"]
        return out
    for name, fn in _PREDICTORS.items():
        try:
            out[name.replace("-", "_")] = fn(p)
        except DomainError:
            pass
    return out


def cmd_diagram(c):
    try:
        grid = GridSpec(float(c["mu_min"]), float(c["mu_max"]), int(c["mu_steps"]),
                        float(c["b_min"]), float(c["b_max"]), int(c["b_steps"]))
    except DomainError as exc:
        raise UsageError(str(exc)) from None
    cfg = _sim_config(c)
    n = _batches(c)
    pts = scan_grid(grid, cfg, n, c["method"], _threads(c))
    for pt in pts:
        if pt.error:
            print(f"cell mu={pt.mu} b={pt.b}: {pt.error}", file=sys.stderr)
    return pts


def cmd_zero(c):
    tol = float(c["tol"])
    if not tol > 0:
        raise UsageError("--tol must be > 0")
    if not 0 <= c["b_lo"] < c["b_hi"]:
        raise UsageError("need 0 <= --b-lo < --b-hi")
    cfg = _sim_config(c)
    z = bisect_zero(float(c["mu"]), float(c["b_lo"]), float(c["b_hi"]), cfg, _batches(c), tol,
                    c["method"], bool(c["strict"]), _threads(c))
    return {"mu": c["mu"], "root": z.root, "b_lo": z.b_lo, "b_hi": z.b_hi,
            "evaluations": len(z.history), "ambiguous_steps": z.ambiguous_steps,
            "seed": cfg.seed}


def cmd_verify(c):
    suite, seed = c["suite"], int(c["seed"])
    threads = _threads(c)
    results = acceptance.run_suite(suite, seed, threads,
                                   progress=lambda r: print(r.line(), file=sys.stderr, flush=True))
    return results


COMMANDS = {
    "lyapunov": cmd_lyapunov, "density": cmd_density, "bounds": cmd_bounds, "psi": cmd_psi,
    "cstar": cmd_cstar, "predict": cmd_predict, "diagram": cmd_diagram, "zero": cmd_zero,
    "verify": cmd_verify,
}


def _write(path: str, text: str):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _manifest(command, c, started):
    params = {k: v for k, v in sorted(c.items()) if k not in ("out",)}
    return {"command": command, "parameters": params, "seed": c.get("seed"),
            "version": __version__, "duration_s": round(time.monotonic() - started, 3)}


def _emit(command, c, result, started):
    out = c.get("out")
    if command == "diagram":
        write_csv(result, out)
    elif command == "verify":
        text = acceptance.dumps(result, c["suite"], int(c["seed"]))
        out = out or f"verify_{c['suite']}.json"
        _write(out, text)
        print(json.dumps({"suite": c["suite"], "seed": int(c["seed"]),
                          "passed": all(r.passed for r in result),
                          "failed": [r.number for r in result if not r.passed],
                          "results_file": out}))
    elif command == "density":
        if out:
            _write(out, result)
        else:
            sys.stdout.write(result)
    else:
        if "seed" in c and "seed" not in result:
            result["seed"] = c["seed"]
        text = json.dumps({k: (_num(v) if isinstance(v, float) else v)
                           for k, v in result.items()}) + "\n"
        if out:
            _write(out, text)
        else:
            sys.stdout.write(text)
    if out:
        _write(out + ".manifest.json",
               json.dumps(_manifest(command, c, started), indent=2, sort_keys=True) + "\n")


def run(argv=None) -> int:
    started = time.monotonic()
    ap = build_parser()
    try:
        ns = ap.parse_args(argv)
        if ns.command is None:
            raise UsageError("a command is required: " + ", ".join(COMMANDS))
        c = resolve(ns)
        result = COMMANDS[ns.command](c)
        _emit(ns.command, c, result, started)
    except UsageError as exc:
        print(f"hopf-lyap: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (HopfLyapError, OSError) as exc:
        print(f"hopf-lyap: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    if ns.command == "verify" and not all(r.passed for r in result):
        return EXIT_RUNTIME
    return EXIT_OK


def main():
    sys.exit(run())
