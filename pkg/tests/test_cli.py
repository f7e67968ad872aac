import csv
import json
import shutil
import subprocess
import sys
from pathlib import Path

import pytest

import plugflow
from plugflow.cli import ENV_OUT, EXIT_PASS, EXIT_RUNTIME, EXIT_VALIDATION, main

SPECS = Path(plugflow.__file__).parent / "specs"


def spec(name):
    return str(SPECS / f"{name}.json")


def run(tmp_path, *argv):
    return main(["--out", str(tmp_path), *argv])


def load(path):
    return json.loads(Path(path).read_text())


def test_build_passes_and_writes_manifest(tmp_path):
    assert run(tmp_path, "--quick", "build", spec("kuperberg_t05")) == EXIT_PASS
    rep = load(tmp_path / "build_report.json")
    assert rep["pass"] and all(c["pass"] for c in rep["radius_certificates"])
    man = load(tmp_path / "manifest.json")
    assert man["command"] == "build" and man["quick"] is True


def test_sabotaged_build_is_a_validation_failure_with_witness(tmp_path):
    assert run(tmp_path, "--quick", "build", spec("kuperberg_sabotaged")) == EXIT_VALIDATION
    fail = load(tmp_path / "failure.json")
    assert "witness" in json.dumps(fail)


def test_invalid_inputs_exit_2(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"kind": "wilson3", "t": 0.0, "bogus": 1}))
    assert run(tmp_path, "build", str(bad)) == EXIT_VALIDATION
    assert run(tmp_path, "build", str(tmp_path / "missing.json")) == EXIT_VALIDATION
    bad.write_text("{not json")
    assert run(tmp_path, "build", str(bad)) == EXIT_VALIDATION
    assert run(tmp_path, "--workers", "0", "build", spec("wilson3")) == EXIT_VALIDATION
    assert run(tmp_path, "orbit", spec("wilson3"), "--seed", "0,1,5") == EXIT_VALIDATION


def test_runtime_error_exits_1(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert main(["--out", str(blocker), "build", spec("wilson3")]) == EXIT_RUNTIME


def test_env_var_sets_output_dir(tmp_path, monkeypatch):
    monkeypatch.setenv(ENV_OUT, str(tmp_path / "env"))
    assert main(["--quick", "build", spec("wilson3")]) == EXIT_PASS
    assert (tmp_path / "env" / "build_report.json").is_file()


def test_orbit_outputs(tmp_path):
    assert run(tmp_path, "orbit", spec("wilson3"), "--seed=-2,1.0,1.5") == EXIT_PASS
    events = [json.loads(line) for line in (tmp_path / "orbit_events.jsonl").read_text().splitlines()]
    assert events[-1]["kind"] == "HitTop"
    with open(tmp_path / "orbit_samples.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0][:4] == ["time", "z", "theta", "r"] and len(rows) > 2
    summ = load(tmp_path / "orbit_summary.json")
    assert summ["terminal"] == "exited"


def test_quick_verify_suite(tmp_path):
    assert run(tmp_path, "--quick", "verify", spec("wilson3"), "--suite", "property-ii") == EXIT_PASS
    assert load(tmp_path / "verify_property-ii.json")["pass"] is True


def test_scan_outputs_do_not_depend_on_workers(tmp_path):
    args = ["--quick", "scan-exit", spec("wilson3"), "--n-theta", "40", "--n-r", "40"]
    assert main(["--out", str(tmp_path / "a"), "--workers", "1", *args]) == EXIT_PASS
    assert main(["--out", str(tmp_path / "b"), "--workers", "2", *args]) == EXIT_PASS
    assert (tmp_path / "a" / "scan_exit.csv").read_text() == (tmp_path / "b" / "scan_exit.csv").read_text()


def test_console_script(tmp_path):
    exe = shutil.which("plugflow")
    cmd = [exe] if exe else [sys.executable, "-m", "plugflow.cli"]
    res = subprocess.run([*cmd, "--out", str(tmp_path), "--quick", "build", spec("wilson3")],
                         capture_output=True, text=True, timeout=300)
    assert res.returncode == 0, res.stderr
    assert json.loads(res.stdout.strip().splitlines()[-1])["status"] == "pass"
