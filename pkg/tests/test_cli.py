import json
import subprocess
import sys

import pytest

from hopf_lyap.cli import run


def call(capsys, *argv):
    rc = run(list(argv))
    out, err = capsys.readouterr()
    return rc, out, err


def test_bounds(capsys):
    rc, out, _ = call(capsys, "bounds", "--mu", "0", "--a", "1", "--sigma", "1")
    d = json.loads(out)
    assert rc == 0
    assert d["jhat_threshold_b"] == pytest.approx(1.7320508075688772)
    assert d["certificate"] is True
    assert all(k == k.lower() for k in d)


def test_cstar(capsys):
    rc, out, _ = call(capsys, "cstar")
    assert rc == 0 and 3.52 <= json.loads(out)["c_star"] <= 3.56


def test_psi_single_and_scan(capsys):
    rc, out, _ = call(capsys, "psi", "--zeta", "2")
    assert rc == 0 and json.loads(out)["psi"] < 0
    rc, out, _ = call(capsys, "psi", "--scan", "1", "10", "4")
    d = json.loads(out)
    assert len(d["psi"]) == 4 and d["psi"][0] < 0 < d["psi"][-1]


def test_psi_flag_conflict_is_usage_error(capsys):
    rc, _, err = call(capsys, "psi", "--zeta", "2", "--scan", "1", "2", "3")
    assert rc == 2 and "--zeta" in err
    rc, _, err = call(capsys, "psi")
    assert rc == 2


def test_predict(capsys):
    rc, out, _ = call(capsys, "predict", "--mu", "1", "--a", "1", "--b", "1", "--sigma", "0.2",
                      "--regime", "small-sigma")
    assert rc == 0 and json.loads(out)["prediction"] == pytest.approx(-0.04)
    rc, _, err = call(capsys, "predict", "--mu", "-1", "--a", "1", "--b", "1", "--sigma", "0.2",
                      "--regime", "ce")
    assert rc == 2 and "--regime" in err
    rc, out, _ = call(capsys, "predict", "--mu", "-1", "--a", "1", "--b", "1", "--sigma", "0.2")
    d = json.loads(out)
    assert "large_b" in d and "ce" not in d and "small_sigma" not in d


def test_lyapunov_negative_and_seed_echo(capsys):
    rc, out, _ = call(capsys, "lyapunov", "--mu", "1", "--omega", "0", "--a", "1", "--b", "0",
                      "--sigma", "1", "--steps", "200000", "--batches", "4", "--seed", "9")
    d = json.loads(out)
    assert rc == 0 and d["mean"] < 0 and d["seed"] == 9 and d["n_batches"] == 4


def test_lyapunov_all_methods(capsys):
    rc, out, _ = call(capsys, "lyapunov", "--mu", "1", "--a", "1", "--b", "1", "--sigma", "0.5",
                      "--method", "all", "--steps", "100000", "--batches", "4")
    d = json.loads(out)
    assert rc == 0
    for k in ("cartesian_mean", "polar_mean", "frame_mean", "z_cartesian_vs_polar"):
        assert k in d


@pytest.mark.parametrize("argv, flag", [
    (["lyapunov", "--mu", "1", "--a", "-1", "--b", "0", "--sigma", "1"], "--a"),
    (["lyapunov", "--mu", "1", "--a", "1", "--b", "0", "--sigma", "0"], "--sigma"),
    (["lyapunov", "--mu", "1", "--a", "1", "--b", "0"], "--sigma"),
    (["lyapunov", "--mu", "1", "--a", "1", "--b", "0", "--sigma", "1", "--steps", "0"], "--steps"),
    (["lyapunov", "--mu", "1", "--a", "1", "--b", "0", "--sigma", "1", "--batches", "1"], "--batches"),
    (["lyapunov", "--mu", "x"], "--mu"),
    (["zero", "--mu", "0", "--b-lo", "5", "--b-hi", "1"], "--b-lo"),
    (["diagram", "--mu-min", "0", "--mu-max", "1", "--mu-steps", "1", "--b-min", "0",
      "--b-max", "1", "--b-steps", "1"], "--out"),
])
def test_usage_errors(capsys, argv, flag):
    rc, out, err = call(capsys, *argv)
    assert rc == 2 and out == "" and flag in err


def test_no_command(capsys):
    assert call(capsys)[0] == 2


def test_runtime_error_exit_code(capsys):
    rc, out, err = call(capsys, "zero", "--mu", "0", "--b-lo", "6", "--b-hi", "7",
                        "--steps", "100000", "--batches", "4")
    assert rc == 1 and "bracket" in err


def test_config_precedence(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"mu": 1, "a": 1, "b": 0, "sigma": 1, "steps": 50000,
                               "batches": 3, "seed": 4}))
    rc, out, _ = call(capsys, "lyapunov", "--config", str(cfg))
    d = json.loads(out)
    assert rc == 0 and d["seed"] == 4 and d["n_batches"] == 3 and d["total_steps"] == 150000
    rc, out, _ = call(capsys, "lyapunov", "--config", str(cfg), "--seed", "5")
    assert json.loads(out)["seed"] == 5


def test_config_unknown_key(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"bogus": 1}))
    assert call(capsys, "cstar", "--config", str(cfg))[0] == 2


def test_density_file_and_manifest(tmp_path, capsys):
    out = tmp_path / "rho.csv"
    rc, _, _ = call(capsys, "density", "--mu", "0", "--a", "1", "--sigma", "1",
                    "--r-max", "3", "--points", "30", "--out", str(out))
    assert rc == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "r,rho" and len(lines) == 31
    r, rho = map(float, lines[10].split(","))
    assert r == pytest.approx(1.0) and rho == pytest.approx(0.96788289807657339919, rel=1e-12)
    man = json.loads((tmp_path / "rho.csv.manifest.json").read_text())
    assert man["command"] == "density" and "duration_s" in man and "version" in man


def test_diagram_bytes_reproducible(tmp_path, capsys):
    args = ["diagram", "--mu-min", "0", "--mu-max", "1", "--mu-steps", "2", "--b-min", "0",
            "--b-max", "6", "--b-steps", "2", "--steps", "50000", "--batches", "2", "--seed", "3"]
    assert call(capsys, *args, "--out", str(tmp_path / "a.csv"))[0] == 0
    assert call(capsys, *args, "--out", str(tmp_path / "b.csv"), "--threads", "2")[0] == 0
    a = (tmp_path / "a.csv").read_bytes()
    assert a == (tmp_path / "b.csv").read_bytes()
    assert a.count(b"\n") == 5
    man = json.loads((tmp_path / "a.csv.manifest.json").read_text())
    assert man["seed"] == 3 and man["parameters"]["mu_steps"] == 2


def test_zero_command(capsys):
    rc, out, _ = call(capsys, "zero", "--mu", "0", "--b-lo", "6", "--b-hi", "12", "--tol", "1.5",
                      "--steps", "300000", "--batches", "8")
    d = json.loads(out)
    assert rc == 0 and 6 < d["root"] < 12 and d["b_hi"] - d["b_lo"] <= 1.5


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "hopf_lyap", "cstar"], capture_output=True, text=True)
    assert res.returncode == 0 and "c_star" in json.loads(res.stdout)
