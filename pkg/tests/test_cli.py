import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from ioctomo.cli import run
from ioctomo.povm import load_povm, resolve_povm


def test_povm_check(capsys):
    assert run(["povm", "check", "builtin:tetrahedron"]) == 0
    out = capsys.readouterr().out
    assert out.splitlines()[0] == "IC: true, tight-IC: true (residual < 1e-12)"
    assert "frame spectrum: 0.666667 0.666667 0.666667 2" in out


def test_povm_check_not_tight(tmp_path, capsys):
    ops = np.array([np.diag([1, 0]), np.diag([0, 1]), [[0.5, 0.5], [0.5, 0.5]], [[0.5, -0.5], [-0.5, 0.5]]]) / 2
    path = tmp_path / "p.json"
    path.write_text(json.dumps({"dim": 2, "outcomes": np.stack([ops, 0 * ops], -1).tolist()}))
    assert run(["povm", "check", str(path)]) == 0
    assert capsys.readouterr().out.startswith("IC: false, tight-IC: false")


def test_povm_export_round_trip(tmp_path):
    path = tmp_path / "sic3.json"
    assert run(["povm", "export", "builtin:sic3", "--out", str(path)]) == 0
    assert np.array_equal(load_povm(path).outcomes, resolve_povm("builtin:sic3").outcomes)
    again = tmp_path / "again.json"
    assert run(["povm", "export", str(path), "--out", str(again)]) == 0
    assert again.read_bytes() == path.read_bytes()


def test_invalid_povm_file_exit_1(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"dim": 2, "outcomes": [[[[1, 0], [0, 0]], [[0, 0], [0, 0]]]]}))
    assert run(["povm", "check", str(path)]) == 1
    assert "invalid input" in capsys.readouterr().err


def test_analytic_eval(capsys):
    assert run(["analytic", "eval", "--formula", "sic_mse", "--d", "2", "--purity", "1"]) == 0
    assert capsys.readouterr().out.strip() == "4"
    assert run(["analytic", "eval", "--formula", "qubit_cube_mse", "--bloch", "0.6886", "0.1137", "-0.5025"]) == 0
    assert float(capsys.readouterr().out) == pytest.approx(3.27634, abs=1e-5)
    assert run(["analytic", "eval", "--formula", "covariant_mse", "--d", "3", "--r", "2", "--s", "1"]) == 0
    assert capsys.readouterr().out.strip() == "9"
    assert run(["analytic", "eval", "--formula", "qubit_sic_avg_logvolume", "--bloch", "0", "0", "0.5"]) == 0
    assert capsys.readouterr().out.strip() == "numeric-only"


def test_analytic_errors(capsys):
    assert run(["analytic", "eval", "--formula", "nope"]) == 1
    assert run(["analytic", "eval", "--formula", "sic_mse", "--d", "2"]) == 1
    assert run(["analytic", "list"]) == 0
    assert "sic_mse" in capsys.readouterr().out


def test_unknown_flag_exit_1(capsys):
    assert run(["povm", "check", "builtin:cube", "--frobnicate"]) == 1
    assert "usage" in capsys.readouterr().err
    assert run([]) == 1


def test_estimate_json(tmp_path, capsys):
    counts = tmp_path / "c.txt"
    counts.write_text("3, 2, 4, 1")
    assert run(["estimate", "--povm", "builtin:tetrahedron", "--counts", str(counts), "--estimator", "cle"]) == 0
    out = json.loads(capsys.readouterr().out)
    rho = np.array(out["estimate"])
    rho = rho[..., 0] + 1j * rho[..., 1]
    assert np.trace(rho).real == pytest.approx(1)
    assert out["N"] == 10 and "scaled_mse" in out["figures"]


def test_estimate_modes(tmp_path, capsys):
    counts = tmp_path / "c.json"
    counts.write_text(json.dumps([30, 25, 20, 10, 5, 10]))
    state = tmp_path / "s.json"
    state.write_text(json.dumps({"bloch": [0.1, 0.2, 0.3]}))
    base = ["estimate", "--povm", "builtin:octahedron", "--counts", str(counts)]
    assert run(base + ["--estimator", "blue", "--blue-mode", "oracle", "--true-state", str(state),
                       "--weight", "bures", "--weight", "chernoff"]) == 0
    figs = json.loads(capsys.readouterr().out)["figures"]
    assert figs["scaled_msb"] <= figs["scaled_wmse_chernoff"]
    assert run(base + ["--estimator", "blue", "--blue-mode", "twostep"]) == 0
    assert json.loads(capsys.readouterr().out)["estimator"] == "blue_twostep"
    assert run(base + ["--estimator", "mle"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["diagnostics"]["converged"] is True and min(out["eigenvalues"]) > -1e-10
    assert run(base + ["--estimator", "blue", "--blue-mode", "oracle"]) == 1


def test_estimate_boundary_exit_2(tmp_path, capsys):
    counts = tmp_path / "c.json"
    counts.write_text("[10, 0, 0, 0]")
    rc = run(["estimate", "--povm", "builtin:tetrahedron", "--counts", str(counts), "--estimator", "mle",
              "--weight", "bures"])
    assert rc == 2
    assert "estimate: numerical failure: boundary state" in capsys.readouterr().err


def test_estimate_count_mismatch(tmp_path):
    counts = tmp_path / "c.json"
    counts.write_text("[1, 2, 3]")
    assert run(["estimate", "--povm", "builtin:tetrahedron", "--counts", str(counts)]) == 1
    counts.write_text("[1, -2, 3, 1]")
    assert run(["estimate", "--povm", "builtin:tetrahedron", "--counts", str(counts)]) == 1


def test_simulate_command(tmp_path, capsys):
    cfg = tmp_path / "exp.json"
    cfg.write_text(json.dumps({"povm": "builtin:mub2", "state": {"bloch": [0, 0.3, 0.4]},
                               "estimators": ["CLE", "BLUE2"], "N_grid": [100], "repetitions": 20,
                               "seed": 1, "output": str(tmp_path / "run")}))
    assert run(["simulate", "--config", str(cfg), "--threads", "2"]) == 0
    with open(tmp_path / "run_aggregate.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert {r["estimator"] for r in rows} == {"cle", "blue_plugin", "cle~blue_plugin"}
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"estimators": ["magic"]}))
    assert run(["simulate", "--config", str(bad)]) == 1
    assert run(["simulate", "--config", str(cfg), "--threads", "0"]) == 1


def test_output_directory_from_environment(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("IOCTOMO_OUTPUT_DIR", str(tmp_path))
    assert run(["figures", "fig2"]) == 0
    assert (tmp_path / "fig2.csv").exists()


def test_figures_fig3_fig4(tmp_path):
    assert run(["figures", "fig3", "--reps", "30", "--out", str(tmp_path)]) == 0
    assert run(["figures", "fig4", "--samples", "200", "--out", str(tmp_path)]) == 0
    with open(tmp_path / "fig4.csv") as fh:
        rows = list(csv.DictReader(fh))
    haar = [r for r in rows if r["source"] == "haar" and r["measurement"] == "mub" and r["figure"] == "avg_mse"]
    for r in haar:
        s = float(r["s"])
        assert float(r["value"]) == pytest.approx(3 * (3 - s * s) / 2, abs=1e-10)
    with open(tmp_path / "fig3_ellipses.csv") as fh:
        rows = list(csv.DictReader(fh))
    exact = [r for r in rows if r["source"] == "exact" and r["recon"] == "optimal"]
    for r in exact:
        x, z = float(r["x"]), float(r["z"])
        assert float(r["cxx"]) == pytest.approx(3 * (1 - x * x), abs=1e-9)
        assert float(r["czz"]) == pytest.approx(3 * (1 - z * z), abs=1e-9)


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "ioctomo", "analytic", "eval", "--formula", "mub_mse",
                           "--d", "3", "--purity", "0.5"], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.strip() == "10"


def test_analytic_params_form(capsys):
    assert run(["analytic", "eval", "--formula", "sic_mse", "--params", "d=2", "purity=1"]) == 0
    assert capsys.readouterr().out.strip() == "4"
    assert run(["analytic", "eval", "--formula", "sic_mse", "--params", "dim=2"]) == 1


def test_figures_fig1_cle_mean(tmp_path, capsys):
    assert run(["figures", "fig1", "--seed", "7", "--reps", "100", "--out", str(tmp_path)]) == 0
    capsys.readouterr()
    with open(tmp_path / "fig1_aggregate.csv") as fh:
        rows = [r for r in csv.DictReader(fh) if r["N"] == "100000" and r["estimator"] == "cle" and r["figure"] == "mse"]
    assert len(rows) == 1 and rows[0]["R"] == "100"
    mean, se = float(rows[0]["mean"]), float(rows[0]["stderr"])
    # contractual 5% band; at R=100 one standard error is about 10% of the mean
    assert abs(mean / 4.130 - 1) < 0.05, f"CLE mean {mean:.4f} +- {se:.4f} (R=100) vs 4.130"
