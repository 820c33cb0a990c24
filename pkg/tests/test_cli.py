import json

import numpy as np
import pytest

import src.curvature.abreu as abreu
from src.cli.commands import build_parser, run_command, selftest
from src.constants import ExitCodes


def _rows(path):
    return path.read_text(encoding="utf-8").splitlines()


def test_scalar_curvature_of_interval(tmp_path):
    """Test the interval curvature CSV at 64 cells."""
    out = tmp_path / "s.csv"

    code = run_command(["scalar-curvature", "--builtin", "interval", "--grid", "64", "--out", str(out)])

    assert code == ExitCodes.SUCCESS
    rows = _rows(out)
    assert rows[0] == "x_1,S,theta,residual"
    assert len(rows) == 65
    S = np.array([float(row.split(",")[1]) for row in rows[1:]])
    np.testing.assert_allclose(S, 4.0, rtol=0, atol=1e-9)


def test_scalar_curvature_from_potential_file(tmp_path):
    """Test that --potential reads the grid and correction from JSON."""
    potential = tmp_path / "u.json"
    potential.write_text(json.dumps({"polytope": {"builtin": "square"}, "grid_n": 8, "values": [0.0] * 64}), encoding="utf-8")
    out = tmp_path / "s.csv"

    code = run_command(["scalar-curvature", "--potential", str(potential), "--out", str(out)])

    assert code == ExitCodes.SUCCESS
    assert len(_rows(out)) == 65


def test_missing_config(tmp_path, capsys):
    """Test the exit code and diagnostic for a missing flow config."""
    code = run_command(["flow", "--config", str(tmp_path / "missing.json")])

    assert code == ExitCodes.INPUT_ERROR
    assert "config not found" in capsys.readouterr().err


def test_unknown_verb(capsys):
    """Test that an unknown verb is an input error."""
    assert run_command(["integrate"]) == ExitCodes.INPUT_ERROR
    assert "error:" in capsys.readouterr().err


def test_scalar_curvature_needs_out(capsys):
    """Test that a missing --out is an input error."""
    assert run_command(["scalar-curvature", "--builtin", "interval"]) == ExitCodes.INPUT_ERROR
    assert "--out" in capsys.readouterr().err


def test_unknown_builtin(tmp_path):
    """Test that an unknown polytope name is an input error."""
    code = run_command(["scalar-curvature", "--builtin", "hexagon", "--out", str(tmp_path / "s.csv")])

    assert code == ExitCodes.INPUT_ERROR


def test_project_report_is_deterministic(tmp_path):
    """Test that two project runs on the same inputs write identical bytes."""
    first, second = tmp_path / "p1.json", tmp_path / "p2.json"

    assert run_command(["project", "--builtin", "square", "--grid", "8", "--out", str(first)]) == ExitCodes.SUCCESS
    assert run_command(["project", "--builtin", "square", "--grid", "8", "--out", str(second)]) == ExitCodes.SUCCESS

    assert first.read_bytes() == second.read_bytes()
    report = json.loads(first.read_text(encoding="utf-8"))
    assert len(report["values"]) == 64
    assert len(report["parts"]["first"]) == 8
    # the default perturbation has a positive mean, which the distance counts and the defect does not
    assert 0 < report["defect"] < report["distance"]
    assert report["config"]["grid_n"] == 8


def test_project_writes_correction_csv_that_loads_back(tmp_path):
    """Test that the projected correction CSV is a valid --potential and is separable."""
    first, second = tmp_path / "p.json", tmp_path / "again.json"
    assert run_command(["project", "--builtin", "square", "--grid", "8", "--out", str(first)]) == ExitCodes.SUCCESS

    report = json.loads(first.read_text(encoding="utf-8"))
    correction = tmp_path / "p_correction.csv"
    assert report["n_per_axis"] == [8, 8]
    assert _rows(correction)[0] == "x_1,x_2,f"
    assert len(_rows(correction)) == 65

    code = run_command([
        "project", "--potential", str(correction), "--builtin", "square", "--grid", "8", "--out", str(second),
    ])

    assert code == ExitCodes.SUCCESS
    again = json.loads(second.read_text(encoding="utf-8"))
    assert again["defect"] < 1e-24
    assert again["config"]["potential"] == str(correction)


def test_flow_applies_amplitude_override(tmp_path):
    """Test that --amplitude replaces the perturbation amplitude of the config."""
    flow_config = tmp_path / "flow.json"
    flow_config.write_text(json.dumps({
        "polytope": {"builtin": "interval"},
        "grid_n": 16,
        "perturbation": {"kind": "bump", "amplitude": 0.01},
    }), encoding="utf-8")

    code = run_command(["flow", "--config", str(flow_config), "--amplitude", "0"])

    assert code == ExitCodes.SUCCESS
    report = json.loads((tmp_path / "flow_report.json").read_text(encoding="utf-8"))
    assert report["config"]["perturbation"]["amplitude"] == 0.0
    assert report["config"]["perturbation"]["kind"] == "bump"
    assert report["status"] == "converged"
    assert report["steps"] == 0


def test_flow_refuses_misspelled_param(tmp_path, capsys):
    """Test that an unknown key in params is an input error."""
    flow_config = tmp_path / "flow.json"
    flow_config.write_text(json.dumps({
        "polytope": {"builtin": "interval"},
        "grid_n": 16,
        "params": {"tol_enrgy": 1e-9},
    }), encoding="utf-8")

    code = run_command(["flow", "--config", str(flow_config)])

    assert code == ExitCodes.INPUT_ERROR
    assert "tol_enrgy" in capsys.readouterr().err
    assert not (tmp_path / "flow_report.json").exists()


def test_flow_from_config(tmp_path):
    """Test a short flow run writing the report and the series."""
    flow_config = tmp_path / "flow.json"
    flow_config.write_text(json.dumps({
        "polytope": {"builtin": "interval"},
        "grid_n": 16,
        "perturbation": {"kind": "bump", "amplitude": 0.01},
        "params": {"max_steps": 10},
    }), encoding="utf-8")

    code = run_command(["flow", "--config", str(flow_config)])

    assert code == ExitCodes.SUCCESS
    report = json.loads((tmp_path / "flow_report.json").read_text(encoding="utf-8"))
    assert report["status"] == "max_steps_reached"
    assert report["steps"] == 10
    series = _rows(tmp_path / "flow_report_series.csv")
    assert series[0] == "t,energy,distance,defect,min_eig,dt"
    assert len(series) == 12


def test_flow_rejects_bad_start(tmp_path):
    """Test that a start failing positivity is an input error."""
    flow_config = tmp_path / "flow.json"
    flow_config.write_text(json.dumps({
        "polytope": {"builtin": "interval"},
        "grid_n": 16,
        "perturbation": {"kind": "bump", "amplitude": -500.0},
    }), encoding="utf-8")

    assert run_command(["flow", "--config", str(flow_config)]) == ExitCodes.INPUT_ERROR


def test_verify_theorem_on_square(tmp_path):
    """Test the verdict for the default perturbation of the square."""
    out = tmp_path / "theorem.json"

    code = run_command(["verify-theorem", "--builtin", "square", "--grid", "8", "--out", str(out)])

    assert code == ExitCodes.SUCCESS
    report = json.loads(out.read_text(encoding="utf-8"))
    assert report["verdict"] is True
    assert report["status"] == "converged"
    assert (tmp_path / "theorem_series.csv").exists()


def test_verify_theorem_needs_product(tmp_path, capsys):
    """Test that the simplex has no product structure to verify against."""
    code = run_command(["verify-theorem", "--builtin", "simplex2", "--grid", "8", "--out", str(tmp_path / "t.json")])

    assert code == ExitCodes.INPUT_ERROR
    assert "product" in capsys.readouterr().err


def test_selftest_passes(capsys):
    """Test that every selftest check passes."""
    code = run_command(["selftest"])

    lines = capsys.readouterr().out.splitlines()
    assert code == ExitCodes.SUCCESS
    assert len(lines) == 5
    assert all(line.startswith("PASS ") for line in lines)


def test_selftest_catches_sign_error(monkeypatch, capsys):
    """Test that a flipped curvature sign fails the selftest."""
    original = abreu.curvature_from_hessian

    def flipped(field):
        scalar = original(field)
        return abreu.ScalarField(grid=scalar.grid, values=-scalar.values)

    monkeypatch.setattr(abreu, "curvature_from_hessian", flipped)

    code = selftest()

    out = capsys.readouterr().out
    assert code == ExitCodes.NUMERICAL_FAILURE
    assert "FAIL scalar_curvature interval" in out


def test_parser_lists_verbs():
    """Test the verb choices of the parser."""
    args = build_parser().parse_args(["project", "--builtin", "square"])

    assert args.verb == "project"
    assert args.grid is None
