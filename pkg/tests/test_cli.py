import csv
import json
from importlib import resources

import pytest

from ppktp_source.cli import main
from ppktp_source.phasematching import fwhm_bandwidth_formula

FIXTURES = resources.files("ppktp_source").joinpath("data").joinpath("fixtures")


def run(tmp_path, *args):
    return main(["--out-dir", str(tmp_path), *args])


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_tuning_curve(tmp_path, capsys):
    assert run(tmp_path, "tuning-curve") == 0
    rows = _rows(tmp_path / "tuning_curve.csv")
    assert rows[0][:4] == ["T_C", "lambda_s_nm", "lambda_i_nm", "degenerate_flag"]
    body = rows[1:]
    assert len(body) == 36
    row49 = next(r for r in body if float(r[0]) == 49)
    assert abs(float(row49[1]) - float(row49[2])) < 2.0


def test_tuning_curve_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run(a, "tuning-curve") == 0
    assert run(b, "tuning-curve") == 0
    assert (a / "tuning_curve.csv").read_bytes() == (b / "tuning_curve.csv").read_bytes()


def test_tuning_curve_usage_error(tmp_path, capsys):
    assert run(tmp_path, "tuning-curve", "--t-min", "60", "--t-max", "25") == 2
    err = json.loads(capsys.readouterr().err)
    assert err["error"]["type"] == "usage"


def test_tuning_curve_missing_root_exits_nonzero(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"crystal": {"poling_period_um": 20.0}}))
    assert run(tmp_path, "--config", str(cfg), "tuning-curve", "--t-min", "25", "--t-max", "27") == 1
    body = _rows(tmp_path / "tuning_curve.csv")[1:]
    assert all(r[4] == "0" for r in body)


def test_spectrum(tmp_path, capsys):
    assert run(tmp_path, "spectrum") == 0
    out = capsys.readouterr().out
    fwhm = float(out.split("FWHM = ")[1].split()[0])
    assert fwhm == pytest.approx(fwhm_bandwidth_formula(25), rel=0.15)
    rows = _rows(tmp_path / "spectrum.csv")
    assert rows[0] == ["lambda_nm", "intensity_rel"]
    assert max(float(r[1]) for r in rows[1:]) == 1.0
    assert run(tmp_path, "spectrum", "--points", "2") == 2


def _simulate(tmp_path, preset, seed="7"):
    assert run(tmp_path, "--format", "json", "--config", preset, "--seed", seed, "simulate") == 0
    return json.loads((tmp_path / "simulate.json").read_text())


def test_simulate_lab(tmp_path):
    rep = _simulate(tmp_path, "lab")
    assert rep["B_per_s_mW_nm"] == pytest.approx(273333, rel=0.10)
    assert rep["seed"] == 7
    for key in ("R_c_per_s", "eta_c", "F", "T", "V", "std_F", "std_T", "config_hash"):
        assert key in rep
    assert (tmp_path / "rho_mle.csv").exists()


def test_simulate_ideal(tmp_path):
    rep = _simulate(tmp_path, "ideal")
    assert rep["T"] >= 0.999
    assert rep["V"] >= 0.999


def test_simulate_deterministic(tmp_path):
    a = _simulate(tmp_path / "a", "ideal", "3")
    b = _simulate(tmp_path / "b", "ideal", "3")
    assert a == b


def test_simulate_requires_seed(tmp_path, capsys):
    assert run(tmp_path, "--config", "lab", "simulate") == 2
    assert "seed" in capsys.readouterr().err


def test_seed_flag_after_subcommand(tmp_path):
    assert main(["simulate", "--config", "ideal", "--seed", "3", "--out-dir", str(tmp_path), "--format", "json"]) == 0
    assert json.loads((tmp_path / "simulate.json").read_text())["seed"] == 3


def test_fit_rate_fixture(tmp_path):
    path = FIXTURES.joinpath("rate_scaling_reconstructed.csv")
    assert run(tmp_path, "--format", "json", "fit", "rate_scaling", str(path)) == 0
    rep = json.loads((tmp_path / "fit_rate_scaling.json").read_text())
    assert rep["a"] == pytest.approx(16220, rel=0.05)
    assert "config_hash" in rep


def test_fit_noiseless(tmp_path):
    p = tmp_path / "r.csv"
    p.write_text("L_mm,Rc\n" + "".join(f"{L},{16220 * L ** 0.5!r}\n" for L in (10, 15, 20, 25)))
    assert run(tmp_path, "--format", "json", "fit", "rate_scaling", str(p)) == 0
    rep = json.loads((tmp_path / "fit_rate_scaling.json").read_text())
    assert rep["residual_norm"] < 1e-9
    assert rep["a"] == pytest.approx(16220, rel=1e-12)


def test_fit_sweep_fixture(tmp_path):
    path = FIXTURES.joinpath("sweep_L15_synthetic.csv")
    assert run(tmp_path, "--format", "json", "fit", "sweep", str(path)) == 0
    rep = json.loads((tmp_path / "fit_sweep.json").read_text())
    assert 20 <= rep["w_p_opt_um"] <= 26


def test_fit_errors(tmp_path, capsys):
    p = tmp_path / "empty.csv"
    p.write_text("L_mm,Rc\n")
    assert run(tmp_path, "fit", "rate_scaling", str(p)) == 2
    p.write_text("L_mm,Rc\n10,5\n15,abc\n")
    assert run(tmp_path, "fit", "rate_scaling", str(p)) == 2
    assert "row 2, column 'Rc'" in capsys.readouterr().err
    assert run(tmp_path, "fit", "rate_scaling", str(tmp_path / "missing.csv")) == 2


def test_optimize_focus(tmp_path):
    assert run(tmp_path, "--format", "json", "optimize-focus") == 0
    rep = json.loads((tmp_path / "optimize_focus.json").read_text())
    assert 20 <= rep["w_p_um"] <= 26
    assert rep["xi_si"] == 3.2


def test_tomography_roundtrip(tmp_path):
    _simulate(tmp_path, "ideal")
    counts = tmp_path / "tomography_counts.csv"
    assert run(tmp_path, "--format", "json", "tomography", str(counts)) == 0
    rep = json.loads((tmp_path / "tomography.json").read_text())
    assert rep["F"] > 0.999
    assert run(tmp_path, "--format", "json", "tomography", str(counts), "--mc-runs", "3") == 2
    assert run(tmp_path, "--format", "json", "--seed", "1", "tomography", str(counts), "--mc-runs", "3") == 0
    assert json.loads((tmp_path / "tomography.json").read_text())["std_F"] > 0


def test_csv_headers_carry_units(tmp_path):
    run(tmp_path, "tuning-curve", "--t-min", "40", "--t-max", "41")
    run(tmp_path, "spectrum", "--points", "5")
    for name in ("tuning_curve.csv", "spectrum.csv"):
        header = _rows(tmp_path / name)[0]
        assert any(h.endswith(("_nm", "_C")) for h in header)
    run(tmp_path, "--format", "json", "tuning-curve", "--t-min", "40", "--t-max", "41")
    assert "config_hash" in json.loads((tmp_path / "tuning_curve.json").read_text())


def test_usage_errors(tmp_path, capsys):
    assert run(tmp_path) == 2
    assert run(tmp_path, "nope") == 2
    assert run(tmp_path, "--config", "no_such_preset", "tuning-curve") == 2
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"crystal": {"typo": 1}}))
    assert run(tmp_path, "--config", str(cfg), "tuning-curve") == 2
