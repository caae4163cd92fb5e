"""Tests for config handling, exit codes, and scenario artifacts."""

import filecmp
import json

import numpy as np
import pytest

from splineflow import cli, spectral
from splineflow.errors import ConfigError
from splineflow.spline_model import Monomial, PiecewisePoly, SineScaled


def write_json(path, obj):
    path.write_text(json.dumps(obj))
    return str(path)


# -- config layer


def test_load_config_reports_parse_position(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text('{"n": 5,\n "dt": }')
    with pytest.raises(ConfigError, match=r"line 2, column"):
        cli.load_config(p)


def test_load_config_rejects_unknown_keys(tmp_path):
    p = tmp_path / "cfg.json"
    write_json(p, {"n": 5, "step_size": 0.1})
    with pytest.raises(ConfigError, match="step_size"):
        cli.load_config(p)


def test_load_config_rejects_non_object(tmp_path):
    p = tmp_path / "cfg.json"
    p.write_text("[1, 2, 3]")
    with pytest.raises(ConfigError, match="flat JSON object"):
        cli.load_config(p)


def test_load_config_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        cli.load_config(tmp_path / "absent.json")


def test_resolve_config_precedence():
    cfg = cli.resolve_config("atoms", {"dt": 0.5, "t_end": 7.0}, {"dt": 0.25})
    assert cfg["dt"] == 0.25  # flag beats file
    assert cfg["t_end"] == 7.0  # file beats default
    assert cfg["seed"] == 0  # default survives
    assert cfg["scenario"] == "atoms"
    assert cfg["out_dir"] == "runs/atoms"


def test_resolve_config_validation():
    with pytest.raises(ConfigError, match="unknown scenario"):
        cli.resolve_config("warp", {}, {})
    with pytest.raises(ConfigError, match="'dt' must be positive"):
        cli.resolve_config("atoms", {"dt": 0.0}, {})
    with pytest.raises(ConfigError, match="sigma"):
        cli.resolve_config("stability", {"sigma": -1.0}, {})
    with pytest.raises(ConfigError, match="case"):
        cli.resolve_config("stability", {"case": "saddle"}, {})
    with pytest.raises(ConfigError, match="seed"):
        cli.resolve_config("atoms", {"seed": -3}, {})


def test_parse_ground_truth_kinds():
    f = cli.parse_ground_truth({"kind": "monomial", "a": 0.5, "p": 2})
    assert isinstance(f, Monomial)
    g = cli.parse_ground_truth({"kind": "sine", "A": 1e-3, "k": 2})
    assert isinstance(g, SineScaled)
    h = cli.parse_ground_truth(
        {"kind": "piecewise", "pieces": [[0.0, 1.0, [0.0, 1.0]]]}
    )
    assert isinstance(h, PiecewisePoly)
    with pytest.raises(ConfigError, match="unknown ground_truth"):
        cli.parse_ground_truth({"kind": "cubic"})
    with pytest.raises(ConfigError, match="bad ground_truth"):
        cli.parse_ground_truth({"kind": "monomial", "a": 1.0})


# -- entry point exit codes


def test_main_rejects_unknown_scenario(capsys):
    assert cli.main(["warp"]) == 2
    capsys.readouterr()


def test_main_reports_config_errors(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text("{nope}")
    code = cli.main(["atoms", "--config", str(p)])
    assert code == 2
    assert "configuration error" in capsys.readouterr().err


def test_main_verify_failure_is_exit_3(tmp_path, capsys, monkeypatch):
    def doomed(nystrom_n=2000):
        return [{"name": "stub", "residual": 1.0, "tol": 0.5, "pass": False}]

    monkeypatch.setattr(cli.verify, "oracle_report", doomed)
    code = cli.main(["verify", "--out-dir", str(tmp_path)])
    assert code == 3
    assert "stub" in capsys.readouterr().err
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["pass"] is False
    assert report["checks"][0]["name"] == "stub"
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["error_metrics"]["checks_failed"] == 1


# -- scenario artifacts


def read_csv(path):
    with open(path) as fh:
        header = fh.readline().strip()
    return header, np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)


def test_stationary_scenario_artifacts(tmp_path):
    assert cli.main(["stationary", "--out-dir", str(tmp_path)]) == 0
    rows = json.loads((tmp_path / "stationary.json").read_text())
    assert [r["M"] for r in rows] == list(range(1, 9))
    for r in rows:
        assert len(r["knots"]) == r["M"] and len(r["coefficients"]) == r["M"]
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert set(summary) == {"scenario", "config", "error_metrics", "wall_time_s"}
    assert summary["scenario"] == "stationary"
    assert summary["error_metrics"]["max_stationarity_residual"] <= 1e-8
    assert summary["error_metrics"]["max_knot_residual_gap"] <= 1e-12


def test_spectral_table_artifacts(tmp_path):
    assert cli.main(["spectral-table", "--out-dir", str(tmp_path), "--count", "6"]) == 0
    header, data = read_csv(tmp_path / "spectral_table.csv")
    assert header == "k,xi,zeta,mu,lambda"
    assert data.shape == (6, 5)
    xi = [spectral.characteristic_root(k) for k in range(6)]
    zeta = [spectral.kernel_eigenpair(k).zeta for k in range(6)]
    np.testing.assert_allclose(data[:, 1], xi, rtol=1e-13)
    np.testing.assert_allclose(data[:, 2], zeta, rtol=1e-13)
    mu = (np.arange(6) + 0.5) * np.pi
    np.testing.assert_allclose(data[:, 3], mu, rtol=1e-13)
    np.testing.assert_allclose(data[:, 4], -1.0 / mu**2, rtol=1e-13)


def test_atoms_scenario_finds_the_atom(tmp_path):
    assert cli.main(["atoms", "--out-dir", str(tmp_path)]) == 0
    header, data = read_csv(tmp_path / "trace.csv")
    assert header == "t,loss,c_0,h_0"
    assert data[0, 0] == 0.0
    meta = json.loads((tmp_path / "trace.meta.json").read_text())
    assert meta["scenario"]["kind"] == "atom"
    summary = json.loads((tmp_path / "summary.json").read_text())
    m = summary["error_metrics"]
    assert m["basin"] == "stationary-atom"
    assert m["distance_to_stationary_atom"] <= 1e-4
    assert m["final_velocity_norm"] <= 1e-8


def test_atoms_scenario_is_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    base = ["atoms", "--t-end", "3.0"]
    assert cli.main(base + ["--out-dir", str(a)]) == 0
    assert cli.main(base + ["--out-dir", str(b)]) == 0
    assert filecmp.cmp(a / "trace.csv", b / "trace.csv", shallow=False)
    assert filecmp.cmp(a / "trace.meta.json", b / "trace.meta.json",
                       shallow=False)
    sa = json.loads((a / "summary.json").read_text())
    sb = json.loads((b / "summary.json").read_text())
    for s in (sa, sb):
        s.pop("wall_time_s")
        s["config"].pop("out_dir")
    assert sa == sb


def test_gaussian_scenario_rate_matches_theory(tmp_path):
    assert cli.main(["gaussian", "--out-dir", str(tmp_path),
                     "--t-end", "0.5", "--dt", "1e-3"]) == 0
    header, data = read_csv(tmp_path / "trace.csv")
    assert header == "t,b_c,b_h,A_cc,A_ch,A_hh"
    summary = json.loads((tmp_path / "summary.json").read_text())
    m = summary["error_metrics"]
    assert m["classification"]["classification"] == "unstable"
    # moment flow with constant curvature is exactly exponential
    assert m["hh_rate_rel_error"] <= 1e-10


def test_stability_scenario_artifacts(tmp_path):
    cfg = {"n": 200, "t_end": 0.2, "dt": 1e-3, "case": "stable",
           "record_every": 20}
    p = write_json(tmp_path / "cfg.json", cfg)
    assert cli.main(["stability", "--config", p,
                     "--out-dir", str(tmp_path)]) == 0
    for name, header in (("trace.csv", "t,loss"), ("variance.csv", "t,var_h"),
                         ("theory.csv", "t,var_h")):
        got, _ = read_csv(tmp_path / name)
        assert got == header
    m = json.loads((tmp_path / "summary.json").read_text())["error_metrics"]
    assert m["theory_rate"] == pytest.approx(-2.0)
    assert {"fitted_rate", "rate_rel_error"} <= set(m)


def test_small_c_scenario_tracks_theory(tmp_path):
    cfg = {"n": 50, "t_end": 5.0, "dt": 0.05,
           "ground_truth": {"kind": "sine", "A": 1e-3, "k": 1}}
    p = write_json(tmp_path / "cfg.json", cfg)
    assert cli.main(["small-c", "--config", p, "--out-dir", str(tmp_path)]) == 0
    got, theory = read_csv(tmp_path / "theory.csv")
    assert got == "t,loss"
    assert np.all(np.diff(theory[:, 1]) <= 0)
    m = json.loads((tmp_path / "summary.json").read_text())["error_metrics"]
    assert m["max_rel_error_in_window"] <= 0.05


def test_linearized_scenario_artifacts(tmp_path):
    cfg = {"n": 200, "t_end": 0.5, "truncation": 500, "record_every": 50}
    p = write_json(tmp_path / "cfg.json", cfg)
    assert cli.main(["linearized", "--config", p,
                     "--out-dir", str(tmp_path)]) == 0
    got, _ = read_csv(tmp_path / "theory.csv")
    assert got == "t,loss"
    m = json.loads((tmp_path / "summary.json")
                   .read_text())["error_metrics"]
    assert m["initial_loss"] > 0
    assert m["max_rel_error_in_window"] < 1.0


def test_linearized_rejects_bad_support(tmp_path):
    cfg = {"h_lo": 0.9, "h_hi": 0.2}
    p = write_json(tmp_path / "cfg.json", cfg)
    assert cli.main(["linearized", "--config", p,
                     "--out-dir", str(tmp_path)]) == 2
