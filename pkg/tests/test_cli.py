import json
import subprocess
import sys

import numpy as np
import pytest

from virodiff.cli import EXIT_CONFIG, EXIT_OK, EXIT_SOLVER, EXIT_VERIFY, main, run_subcommand
from virodiff.config import parse_config

BASE = {
    "grid": {"dim": 1, "lengths": [1.0], "nodes": [16], "bc": "neumann"},
    "params": {"k": 1e-5, "N": 100, "mu_T": 0.1, "mu_I": 0.5, "mu_V": 5,
               "D_T": 0.01, "D_I": 0.01, "D_V": 0.01,
               "lambda": {"family": "constant", "value": 10}},
    "init": {"T": {"kind": "constant", "value": 600}, "I": {"kind": "constant", "value": 10},
             "V": {"kind": "constant", "value": 100}},
    "stepper": {"t_end": 1.0, "dt": 0.01, "snapshot_every": 10},
}


def write_cfg(tmp_path, **sections):
    d = json.loads(json.dumps(BASE))
    d.update(sections)
    path = tmp_path / "run.json"
    path.write_text(json.dumps(d))
    return str(path)


def run(tmp_path, command, out="out", **sections):
    cfg = write_cfg(tmp_path, **sections)
    return main([command, "--config", cfg, "--output", str(tmp_path / out), "--quiet"])


def test_classify_canonical(tmp_path):
    assert run(tmp_path, "classify") == EXIT_OK
    summary = json.loads((tmp_path / "out" / "summary.json").read_text())
    assert summary["classification"]["classification"] == "globally_stable_by_corollary"
    assert summary["params"]["mu_T"] == 0.1
    assert summary["metadata"]["wall_clock_seconds"] >= 0


def test_simulate_then_verify(tmp_path):
    assert run(tmp_path, "simulate") == EXIT_OK
    out = tmp_path / "out"
    snaps = sorted(out.glob("snap_*.csv"))
    assert len(snaps) == 11
    header = snaps[0].read_text().splitlines()[0]
    assert header == "node_index,x,T,I,V"
    times = (out / "times.csv").read_text().splitlines()
    assert times[0] == "step,time" and times[-1].startswith("100,")
    assert run(tmp_path, "verify") == EXIT_OK
    report = json.loads((out / "verify_report.json").read_text())
    assert report["T_convergence"]["violations"] == []
    assert report["sup_bounds"]["passed"]


def test_snapshot_values_round_trip(tmp_path):
    run(tmp_path, "simulate")
    row = (tmp_path / "out" / "snap_000000.csv").read_text().splitlines()[1].split(",")
    assert float(row[2]) == 600.0 and row[1] == repr(0.5 / 16)


def test_two_d_header(tmp_path):
    grid = {"dim": 2, "lengths": [1.0, 1.0], "nodes": [4, 5], "bc": "dirichlet"}
    assert run(tmp_path, "simulate", grid=grid) == EXIT_OK
    lines = (tmp_path / "out" / "snap_000000.csv").read_text().splitlines()
    assert lines[0] == "node_index,x,y,T,I,V" and len(lines) == 21


def test_determinism(tmp_path):
    run(tmp_path, "simulate", out="a")
    run(tmp_path, "simulate", out="b")
    for f in (tmp_path / "a").glob("*.csv"):
        assert f.read_bytes() == (tmp_path / "b" / f.name).read_bytes()


def test_verification_failure_exit_code(tmp_path):
    # T0 = T_inf with virus present: T dips below T_inf although the
    # initial gap is zero, so the two-sided decay statement is violated
    init = {"T": {"kind": "t_infinity"}, "I": {"kind": "constant", "value": 10.0},
            "V": {"kind": "constant", "value": 100.0}}
    assert run(tmp_path, "simulate", init=init) == EXIT_OK
    assert run(tmp_path, "verify", init=init) == EXIT_VERIFY
    report = json.loads((tmp_path / "out" / "verify_report.json").read_text())
    assert report["T_convergence"]["violations"]
    assert report["T_convergence"]["upper_bound_passed"]


def test_config_error_exit_code(tmp_path, capsys):
    params = dict(BASE["params"], mu_T=-1.0)
    assert run(tmp_path, "classify", params=params) == EXIT_CONFIG
    err = json.loads(capsys.readouterr().err)
    assert err["key"] == "mu_T"
    assert main(["classify", "--config", str(tmp_path / "missing.json")]) == EXIT_CONFIG


def test_solver_failure_exit_code(tmp_path):
    stepper = {"t_end": 1.0, "dt": 0.5, "scheme": "explicit"}
    assert run(tmp_path, "simulate", stepper=stepper) == EXIT_SOLVER
    err = json.loads((tmp_path / "out" / "error.json").read_text())
    assert "CFL" in err["message"]


def test_verify_without_simulation(tmp_path):
    assert run(tmp_path, "verify") == EXIT_CONFIG


@pytest.mark.parametrize("command", ["steady", "spectrum", "nondim"])
def test_other_subcommands(tmp_path, command):
    analysis = {"n_starts": 3}
    assert run(tmp_path, command, analysis=analysis) == EXIT_OK
    summary = json.loads((tmp_path / "out" / "summary.json").read_text())
    assert summary["subcommand"] == command


def test_sweep_table(tmp_path):
    sweep = {"axis": "k", "values": [1e-5, 1e-3], "experiment": "classify"}
    assert run(tmp_path, "sweep", sweep=sweep) == EXIT_OK
    lines = (tmp_path / "out" / "sweep.csv").read_text().splitlines()
    assert lines[0].startswith("k,eta0") and len(lines) == 3
    rows = json.loads((tmp_path / "out" / "summary.json").read_text())["rows"]
    assert [r["classification"] for r in rows] == ["globally_stable_by_corollary", "unstable"]
    assert run(tmp_path, "sweep", out="nosweep") == EXIT_CONFIG


def test_run_subcommand_api(tmp_path):
    d = json.loads(json.dumps(BASE))
    cfg = parse_config(json.dumps(d))
    assert run_subcommand("nondim", cfg, tmp_path / "api") == EXIT_OK
    q = np.loadtxt(tmp_path / "api" / "q.csv", delimiter=",", skiprows=1)
    assert q[:, 2] == pytest.approx(0.02)


def test_module_entry_point(tmp_path):
    cfg = write_cfg(tmp_path)
    proc = subprocess.run([sys.executable, "-m", "virodiff", "classify", "--config", cfg,
                           "--output", str(tmp_path / "m"), "--quiet"],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
