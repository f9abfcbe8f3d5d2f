import json
import os

import pytest

from torusflow.cli import main


def test_verify_ops_subcommand(tmp_path):
    rc = main(["--seed", "1", "--out", str(tmp_path),
               "verify-ops", "--trials", "3"])
    assert rc == 0
    lines = (tmp_path / "verify_ops.csv").read_text().splitlines()
    assert lines[0] == "d,N,identity,max_rel_error,pass"
    assert len(lines) == 11


def test_params_check_subcommand(tmp_path):
    rc = main(["--out", str(tmp_path), "params-check", "--d", "3",
               "--alpha", "1.2", "--p", "1", "--q", "10", "--lambda", "1e6"])
    assert rc == 0
    payload = json.loads((tmp_path / "params_check.json").read_text())
    assert payload["beta"] > 0
    assert all(rec["pass"] for rec in payload["inequalities"].values())


def test_perturb_subcommand(tmp_path):
    rc = main(["--out", str(tmp_path), "perturb", "--lambda", "16",
               "--N", "32"])
    assert rc == 0
    text = (tmp_path / "perturb_norms.csv").read_text()
    assert "residual_max_rel" in text


def test_report_empty_run(tmp_path):
    run = tmp_path / "empty"
    run.mkdir()
    out = tmp_path / "out"
    rc = main(["--out", str(out), "report", "--run", str(run)])
    assert rc == 0
    bundle = json.loads((out / "bundle.json").read_text())
    assert bundle["artifacts"] == []
    assert (out / "plot_data.csv").read_text().splitlines() == ["x,y,series"]


def test_iterate_config_file(tmp_path):
    cfg = tmp_path / "run.ini"
    cfg.write_text(
        "[problem]\nd = 2\nn = 16\nalpha = 1.4\n"
        "[scheme]\nrounds = 0\n")
    rc = main(["--out", str(tmp_path / "run"), "iterate",
               "--config", str(cfg)])
    assert rc == 0
    saved = json.loads((tmp_path / "run" / "config.json").read_text())
    assert saved["problem"]["n"] == "16"
    assert (tmp_path / "run" / "iterate_norms.csv").exists()
