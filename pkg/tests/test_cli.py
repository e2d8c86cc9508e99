"""Command-line front end: configs, persistence, determinism, exit codes."""

import json
from pathlib import Path

import pytest
from hypothesis import given, settings, strategies as st

from laneshoot.cli import ExperimentConfig, main


def run_cli(*argv):
    return main(list(argv))


def read_csv_body(path: Path) -> str:
    # body = everything except '#' metadata lines
    return "\n".join(l for l in path.read_text().splitlines()
                     if not l.startswith("#"))


def test_config_round_trip_defaults():
    cfg = ExperimentConfig(command="classify")
    assert ExperimentConfig.from_dict(cfg.to_dict()) == cfg


@given(st.floats(0.1, 8.0), st.floats(0.1, 8.0), st.floats(3.0, 9.0),
       st.integers(3, 6))
@settings(max_examples=30)
def test_config_round_trip_random(xi, eta, p, n):
    cfg = ExperimentConfig(command="sweep", xi=xi, eta=eta, p=p, n=n,
                           xi_grid=(xi, xi + 1.0), resolution=7)
    back = ExperimentConfig.from_dict(json.loads(json.dumps(cfg.to_dict())))
    assert back == cfg
    assert back.digest() == cfg.digest()


def test_config_rejects_unknown_fields():
    with pytest.raises(ValueError, match="unknown config fields"):
        ExperimentConfig.from_dict({"command": "classify", "bogus": 1})


def test_classify_writes_artifacts_and_passes(tmp_path):
    rc = run_cli("classify", "--profile", "euclidean", "--n", "3",
                 "--p", "5", "--q", "5", "--xi", "1", "--eta", "1",
                 "--horizon", "50", "--out", str(tmp_path))
    assert rc == 0
    run_dir = next(tmp_path.glob("classify-*"))
    verdict = json.loads((run_dir / "verdict.json").read_text())
    assert verdict["outcome"] == "positive_to_horizon"
    assert verdict["invariants"]["pohozaev_max"] <= 1e-9
    record = json.loads((run_dir / "run.json").read_text())
    assert sorted(record["artifacts"]) == ["trajectory.csv", "verdict.json"]
    header = (run_dir / "trajectory.csv").read_text().splitlines()
    assert header[0].startswith("#")
    assert "r,u,v,du,dv,F,P,K" in "\n".join(header[:12])


def test_classify_first_zero_outcome(tmp_path):
    rc = run_cli("classify", "--profile", "euclidean", "--n", "3",
                 "--p", "5", "--q", "5", "--xi", "1", "--eta", "2.5",
                 "--out", str(tmp_path))
    assert rc == 0
    run_dir = next(tmp_path.glob("classify-*"))
    verdict = json.loads((run_dir / "verdict.json").read_text())
    assert verdict["outcome"] == "first_zero_u"


def test_classify_rejects_nonpositive_eta(tmp_path):
    rc = run_cli("classify", "--profile", "euclidean", "--n", "3",
                 "--eta", "-1", "--out", str(tmp_path))
    assert rc == 2
    assert not list(tmp_path.iterdir())    # no files written


def test_classify_deterministic_bodies(tmp_path):
    args = ("classify", "--profile", "euclidean", "--n", "3", "--p", "5",
            "--q", "5", "--xi", "1.3", "--eta", "0.9", "--out", str(tmp_path))
    assert run_cli(*args) == 0
    run_dir = next(tmp_path.glob("classify-*"))
    body_one = read_csv_body(run_dir / "trajectory.csv")
    assert run_cli(*args) == 0
    assert read_csv_body(run_dir / "trajectory.csv") == body_one


def test_curve_on_incomplete_profile_is_an_error(tmp_path, capsys):
    rc = run_cli("curve", "--profile", "exp_power", "--alpha", "3",
                 "--n", "3", "--xi-grid", "1,2", "--out", str(tmp_path))
    assert rc == 2
    assert "incomplete" in capsys.readouterr().err


def test_band_on_complete_profile_is_an_error(tmp_path, capsys):
    rc = run_cli("band", "--profile", "euclidean", "--n", "3",
                 "--xi-grid", "1,2", "--out", str(tmp_path))
    assert rc == 2
    assert "complete" in capsys.readouterr().err


def test_curve_command(tmp_path):
    rc = run_cli("curve", "--profile", "euclidean", "--n", "3", "--p", "5",
                 "--q", "5", "--xi-grid", "1,2", "--tol", "1e-4",
                 "--out", str(tmp_path))
    assert rc == 0
    run_dir = next(tmp_path.glob("curve-*"))
    rows = [l.split(",") for l in read_csv_body(run_dir / "curve.csv").splitlines()[1:]]
    assert len(rows) == 2
    for row in rows:
        assert abs(float(row[1]) - float(row[0])) < 5e-4   # eta = xi


def test_sweep_command_and_resume(tmp_path, capsys):
    args = ("sweep", "--profile", "euclidean", "--n", "3", "--p", "5",
            "--q", "5", "--xi-range", "0.9,1.1", "--eta-range", "0.9,1.1",
            "--resolution", "2", "--horizon", "30", "--out", str(tmp_path))
    assert run_cli(*args) == 0
    run_dir = next(tmp_path.glob("sweep-*"))
    body = read_csv_body(run_dir / "cells.csv").splitlines()
    assert len(body) == 1 + 4          # header + 2x2 cells
    # row-major ordering over (xi, eta)
    first, second = body[1].split(","), body[2].split(",")
    assert first[0] == second[0] and float(first[1]) < float(second[1])
    capsys.readouterr()
    assert run_cli(*args) == 0
    assert "already complete" in capsys.readouterr().out


def test_verify_unknown_suite(tmp_path, capsys):
    rc = run_cli("verify", "no-such-suite", "--out", str(tmp_path))
    assert rc == 2
    assert "unknown suite" in capsys.readouterr().err


def test_verify_bounds_suite(tmp_path, capsys):
    rc = run_cli("verify", "bounds", "--out", str(tmp_path))
    out = capsys.readouterr().out
    assert rc == 0
    assert "PASS" in out
    run_dir = next(tmp_path.glob("verify-*"))
    report = json.loads((run_dir / "report.json").read_text())
    assert all(entry["passed"] for entry in report)
