import math

import numpy as np
import pytest

import hopf_lyap.analytic as an
from hopf_lyap import diagram
from hopf_lyap.diagram import (CSV_HEADER, DiagramPoint, GridSpec, bisect_zero, ce_reference,
                               find_zero_b, read_csv, scan_grid, write_csv)
from hopf_lyap.errors import AmbiguityError, BracketError, DomainError, NumericalBlowup
from hopf_lyap.sde_sim import FtleSample, SimConfig

DESK = SimConfig(seed=77)
CHEAP = SimConfig.from_horizon(200.0, seed=78)


def test_gridspec_validation():
    with pytest.raises(DomainError):
        GridSpec(1, 0, 2, 0, 1, 2)
    with pytest.raises(DomainError):
        GridSpec(0, 1, 2, -1, 1, 2)
    with pytest.raises(DomainError):
        GridSpec(0, 1, 0, 0, 1, 2)


def test_gridspec_cells_row_major():
    g = GridSpec(0, 1, 2, 3, 5, 3)
    assert g.cells() == [(0, 3), (0, 4), (0, 5), (1, 3), (1, 4), (1, 5)]


def test_ce_reference():
    assert math.isnan(ce_reference(0.0, 3.0))
    assert ce_reference(2.0, 5.0) == pytest.approx(5.0 - 2.0 * math.sqrt(2 * an.c_star()))


def test_scan_cells_and_certificates():
    pts = scan_grid(GridSpec(0, 0, 1, 0, 12, 3), DESK, 16)
    assert [(p.mu, p.b) for p in pts] == [(0, 0), (0, 6), (0, 12)]
    zero, _, twelve = pts
    assert zero.certificate == diagram.PROVABLY_NEGATIVE and zero.lambda_hat < 0
    assert twelve.certificate == diagram.NO_CERTIFICATE
    assert twelve.lambda_hat - 3 * twelve.stderr > 0


def test_scan_cell_with_certificate():
    (pt,) = scan_grid(GridSpec(0, 0, 1, 1, 1, 1), CHEAP, 4)
    assert pt.certificate == diagram.PROVABLY_NEGATIVE


def test_certificate_soundness_on_scan():
    pts = scan_grid(GridSpec(-2, 2, 5, 0, 3, 4), CHEAP, 8)
    for p in pts:
        if p.certificate == diagram.PROVABLY_NEGATIVE:
            assert an.negativity_certificate(diagram._params(p.mu, p.b))
            assert not p.lambda_hat - 4 * p.stderr > 0


def test_scan_deterministic_and_threadsafe(tmp_path):
    g = GridSpec(0, 1, 2, 0, 4, 2)
    write_csv(scan_grid(g, CHEAP, 4, threads=1), tmp_path / "a.csv")
    write_csv(scan_grid(g, CHEAP, 4, threads=4), tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_scan_records_failures(monkeypatch):
    real = diagram.run_batches

    def flaky(p, cfg, method, idx, threads=None):
        if p.b > 1:
            raise NumericalBlowup("boom", batch_index=0)
        return real(p, cfg, method, idx, threads)

    monkeypatch.setattr(diagram, "run_batches", flaky)
    pts = scan_grid(GridSpec(0, 0, 1, 0, 2, 2), CHEAP, 4)
    assert pts[0].ok and not pts[1].ok
    assert "boom" in pts[1].error and math.isnan(pts[1].lambda_hat)


# ---------------------------------------------------------------- csv

def test_csv_empty(tmp_path):
    f = tmp_path / "d.csv"
    write_csv([], f)
    assert f.read_bytes() == (",".join(CSV_HEADER) + "\n").encode()


def test_csv_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    pts = [DiagramPoint(float(rng.normal()), float(rng.uniform(0, 9)), float(rng.normal()) / 3,
                        float(rng.uniform()), diagram.NO_CERTIFICATE, float(rng.normal()),
                        int(rng.integers(0, 2**63)) * 2 + 1, 1e-3 / 3, 123456, 16)
           for _ in range(50)]
    f = tmp_path / "d.csv"
    write_csv(pts, f)
    assert read_csv(f) == pts
    data = f.read_bytes()
    assert b"\r" not in data and data.endswith(b"\n")


def test_csv_nan_round_trip(tmp_path):
    pt = DiagramPoint(0.0, 1.0, -0.5, 0.01, diagram.PROVABLY_NEGATIVE, math.nan, 5, 1e-3, 10, 2)
    write_csv([pt], tmp_path / "d.csv")
    back = read_csv(tmp_path / "d.csv")[0]
    assert math.isnan(back.ce_reference) and back.lambda_hat == pt.lambda_hat


def test_csv_scan_rows(tmp_path):
    pts = scan_grid(GridSpec(0, 1, 2, 0, 1, 2), CHEAP, 2)
    write_csv(pts, tmp_path / "d.csv")
    lines = (tmp_path / "d.csv").read_text(encoding="utf-8").splitlines()
    assert len(lines) == 5
    assert [tuple(map(float, l.split(",")[:2])) for l in lines[1:]] == [(0, 0), (0, 1), (1, 0), (1, 1)]


def test_csv_io_error_names_path(tmp_path):
    with pytest.raises(OSError, match="nope"):
        write_csv([], tmp_path / "nope" / "d.csv")


# ---------------------------------------------------------------- bisection

def _fake_batches(center, noise):
    """run_batches stand-in: lambda(b) = b - center with alternating +-noise."""
    def run(p, cfg, method, idx, threads=None):
        return [FtleSample(p.b - center + (noise if i % 2 else -noise), 1.0, 0, "frame", 1e-3, 1, 0)
                for i in idx]
    return run


def test_bisection_on_known_function(monkeypatch):
    monkeypatch.setattr(diagram, "run_batches", _fake_batches(3.3, 1e-3))
    z = bisect_zero(0.0, 0.0, 10.0, CHEAP, 4, 0.01)
    assert abs(z.root - 3.3) <= 0.01 and z.b_hi - z.b_lo <= 0.01 and z.ambiguous_steps == 0


def test_bisection_ambiguous_midpoint(monkeypatch):
    monkeypatch.setattr(diagram, "run_batches", _fake_batches(5.0, 1.0))
    with pytest.raises(AmbiguityError):
        bisect_zero(0.0, 0.0, 10.0, CHEAP, 4, 1.0, strict=True)
    z = bisect_zero(0.0, 0.0, 10.0, CHEAP, 4, 1.0)
    assert z.ambiguous_steps == 1
    b, mean, se, n, ok = z.history[2]
    assert b == 5.0 and n == 4 * 2**diagram.MAX_DOUBLINGS and not ok


def test_bracket_errors(monkeypatch):
    monkeypatch.setattr(diagram, "run_batches", _fake_batches(20.0, 1e-3))
    with pytest.raises(BracketError):
        find_zero_b(0.0, 0.0, 10.0, CHEAP, 4, 0.1)
    with pytest.raises(DomainError):
        find_zero_b(0.0, 5.0, 1.0, CHEAP, 4, 0.1)
    with pytest.raises(DomainError):
        find_zero_b(0.0, 1.0, 5.0, CHEAP, 4, 0.0)


def test_bracket_same_sign():
    # both ends lie in the stable region
    with pytest.raises(BracketError):
        find_zero_b(0.0, 6.0, 7.0, CHEAP, 4, 0.5)


def test_monotone_refinement():
    cfg = SimConfig.from_horizon(300.0, seed=5)
    coarse = bisect_zero(0.0, 6.0, 12.0, cfg, 8, 1.0)
    fine = bisect_zero(0.0, 6.0, 12.0, cfg, 8, 0.5)
    assert coarse.b_lo <= fine.root <= coarse.b_hi
    assert coarse.b_lo <= fine.b_lo and fine.b_hi <= coarse.b_hi


@pytest.mark.slow
@pytest.mark.parametrize("mu, lo, hi", [(6.0, 12.0, 20.0), (10.0, 20.0, 34.0)])
def test_large_mu_slope(mu, lo, hi):
    root = find_zero_b(mu, lo, hi, SimConfig.from_horizon(1000.0, seed=88), 16, 0.5)
    assert abs(root / mu - math.sqrt(2 * an.c_star())) <= 0.25 * math.sqrt(2 * an.c_star())
