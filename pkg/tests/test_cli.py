import json
import subprocess
import sys

import pytest

from kinlaw import cli

SMALL = {"chart": {"id": "decoupled"}, "nx": 64, "T": 0.2, "epsilon": 0.0,
         "exact": True, "snapshots": 64,
         "initial": {"rule": "sine", "amp": [0.5, 0.3]},
         "family": {"n": 33}, "curves": {"n": 64},
         "diagnostics": {"radii_cells": [1, 2, 4], "bank_size": 2}}


def _write(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


def test_usage_errors(tmp_path, capsys):
    assert cli.run(["frobnicate"]) == 1
    assert cli.run([]) == 1
    assert cli.run(["simulate", "--config", str(tmp_path / "none.json"),
                    "--out", str(tmp_path)]) == 1
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert cli.run(["simulate", "--config", str(bad)]) == 1
    assert cli.run(["simulate", "--config",
                    _write(tmp_path, {"nx": 64}, "nokey.json")]) == 1


def test_invalid_parameter_is_a_config_error(tmp_path):
    cfg = dict(SMALL, diagnostics={"jump_radii_cells": [2, 3, 8]})
    assert cli.run(["jumpset", "--config", _write(tmp_path, cfg),
                    "--out", str(tmp_path / "o")]) == 1


def test_numerical_failure_writes_diagnostic(tmp_path):
    cfg = dict(SMALL, diagnostics={"radii_cells": [16, 32, 64]})
    out = tmp_path / "o"
    assert cli.run(["vmo", "--config", _write(tmp_path, cfg),
                    "--out", str(out)]) == 2
    diag = json.loads((out / "error.json").read_text())
    assert diag["error"] == "BoundaryError"


def test_pipeline_and_report(tmp_path):
    path = _write(tmp_path, SMALL)
    out = tmp_path / "run"
    for cmd in ("simulate", "family", "kinetic", "trace", "qfunc", "jumpset",
                "vmo"):
        assert cli.run([cmd, "--config", path, "--out", str(out)]) == 0, cmd
    assert cli.run(["report", "--out", str(out)]) == 0
    summaries = json.loads((out / "summaries.json").read_text())
    assert {"simulate", "qfunc", "vmo"} <= set(summaries)
    report = (out / "report.md").read_text()
    assert "Interaction functional" in report
    assert (out / "summary.csv").exists()


def test_report_needs_existing_directory(tmp_path):
    assert cli.run(["report", "--out", str(tmp_path / "missing")]) == 1


def test_bundled_config_resolution():
    path = cli.resolve_config_path("examples/decoupled_shock.json")
    cfg = json.loads(path.read_text())
    assert cfg["chart"]["id"] == "decoupled"


def test_console_script_verify(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "kinlaw.cli", "verify", "--config",
         "examples/decoupled_shock.json", "--only", "1", "--out",
         str(tmp_path)], capture_output=True, text=True, cwd=tmp_path)
    assert proc.returncode == 0, proc.stderr
    payload = json.loads(proc.stdout.strip().splitlines()[-1])
    assert payload == {"passed": True, "failed": []}
    assert (tmp_path / "verify.json").exists()
