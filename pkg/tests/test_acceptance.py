"""Acceptance criteria 1-12, each at its stated tolerance.

Run with ``pytest -v tests/test_acceptance.py``; a PASS/FAIL line per
criterion is printed as it finishes and again in the session summary.
``python tests/test_acceptance.py`` runs the same checks without pytest.
"""

import subprocess
import sys

import pytest

from hopf_lyap import acceptance

try:
    from conftest import ACCEPTANCE_LINES
except ImportError:  # run as a script
    ACCEPTANCE_LINES = {}

MASTER_SEED = 0


def _report(number, passed, name, details=None):
    line = f"[{'PASS' if passed else 'FAIL'}] criterion {number}: {name}"
    if details:
        line += "  " + ", ".join(f"{k}={_short(v)}" for k, v in details.items())
    ACCEPTANCE_LINES[number] = line
    print(line, flush=True)
    return line


def _short(v):
    return f"{v:.6g}" if isinstance(v, float) else str(v)


@pytest.mark.parametrize("number", sorted(acceptance.CRITERIA))
def test_criterion(number):
    result = acceptance.CRITERIA[number](MASTER_SEED)
    _report(number, result.passed, result.name, result.details)
    assert result.passed, result.details


def _verify(tmp_dir, threads):
    out = tmp_dir / "quick.json"
    res = subprocess.run(
        [sys.executable, "-m", "hopf_lyap", "verify", "--suite", "quick", "--seed", str(MASTER_SEED),
         "--threads", str(threads), "--out", str(out)],
        capture_output=True, text=True)
    return res, out.read_bytes() if out.exists() else b""


def test_criterion_12_verify_byte_identical(tmp_path):
    (tmp_path / "a").mkdir()
    (tmp_path / "b").mkdir()
    r1, first = _verify(tmp_path / "a", 1)
    r2, second = _verify(tmp_path / "b", 2)
    same = bool(first) and first == second
    _report(12, same, "verify --suite quick reproduces its result file byte for byte",
            {"bytes": len(first), "exit_codes": f"{r1.returncode},{r2.returncode}"})
    assert same, (r1.stderr, r2.stderr)


if __name__ == "__main__":
    import pathlib
    import tempfile

    ok = True
    for n in sorted(acceptance.CRITERIA):
        r = acceptance.CRITERIA[n](MASTER_SEED)
        _report(n, r.passed, r.name, r.details)
        ok &= r.passed
    with tempfile.TemporaryDirectory() as d:
        try:
            test_criterion_12_verify_byte_identical(pathlib.Path(d))
        except AssertionError:
            ok = False
    sys.exit(0 if ok else 1)
