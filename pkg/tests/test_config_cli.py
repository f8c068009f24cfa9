import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from fraceig.cli import main
from fraceig.config import (
    ConfigError,
    config_hash,
    estimator_from_config,
    grid_from_config,
    parse_config,
)

SMALL_VERIFY = """
verify.convexity_trials = 20
verify.truncation_samples = 500
verify.abs_trials = 20
verify.probes = 300
verify.seeds = 3
"""


def write_cfg(tmp_path, body, name="run.cfg"):
    out = tmp_path / "out"
    path = tmp_path / name
    path.write_text(body + f"\noutput.directory = {out}\n")
    return path, out


def test_defaults_and_fractions():
    cfg = parse_config("grid.dim = 2\ngrid.h = 1/8  # eighths\nkernel.s = 0.4\n")
    assert cfg["grid.h"] == 0.125
    assert grid_from_config(cfg).size == 64
    assert cfg["kernel.p"] == 2.0


@pytest.mark.parametrize(
    "text",
    [
        "solver.tol = 1e-8",
        "kernel.s = 0.5\nkernel.s = 0.6",
        "kernel.s = half",
        "kernel.s",
        "kernel.s = 1.5",
        "grid.dim = 2\ngrid.h = 0.3",
        "grid.mask = star",
        "solve.mode = third",
        "output.formats = json, xml",
        "solve.enforce_sign = maybe",
        "grid.N = 2.5",
    ],
)
def test_rejects_bad_config(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_seed_env_override(monkeypatch):
    monkeypatch.setenv("FRAC_EIG_SEED", "17")
    assert parse_config("solve.seed = 3")["solve.seed"] == 17
    monkeypatch.setenv("FRAC_EIG_SEED", "x")
    with pytest.raises(ConfigError):
        parse_config("")


def test_hash_ignores_output_directory():
    a = parse_config("output.directory = a")
    b = parse_config("output.directory = b")
    c = parse_config("kernel.s = 0.3")
    assert config_hash(a) == config_hash(b) != config_hash(c)


def test_estimator_from_config():
    est = estimator_from_config(parse_config("kernel.p = 3\nsolve.seed = 5"))
    assert est.p == 3.0 and est.seed == 5


def test_solve_writes_result(tmp_path):
    path, out = write_cfg(tmp_path, "kernel.s = 0.5\nkernel.p = 2\ngrid.N = 64\noutput.dump_eigenfunction = true")
    assert main(["solve", str(path)]) == 0
    rec = json.loads((out / "result.json").read_text())
    assert rec["schema_version"] == 1 and rec["converged"] and rec["status"] == "converged"
    assert rec["nodes"] == 64
    assert main(["oracle", str(path)]) == 0
    orc = json.loads((out / "oracle.json").read_text())
    assert abs(rec["lambda"] / orc["lambda_oracle"] - 1) <= 1e-8
    assert orc["rel_diff_odd"] <= 1e-8
    with open(out / "eigenfunction.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 64 and set(rows[0]) == {"node_index", "x", "u"}
    assert np.allclose([float(r["u"]) for r in rows], rec["eigenfunction"])


def test_solve_single_node(tmp_path):
    path, out = write_cfg(tmp_path, "grid.a = 0\ngrid.b = 1\ngrid.N = 1")
    assert main(["solve", str(path)]) == 0
    rec = json.loads((out / "result.json").read_text())
    # lambda = t_0 / h with t_0 = 2 h (2^sp + 2^sp) / sp, h = 1, sp = 1
    assert rec["lambda"] == pytest.approx(8.0)


def test_solve_max_iters_exit(tmp_path):
    path, _ = write_cfg(tmp_path, "kernel.p = 3\nsolve.max_iters = 2")
    assert main(["solve", str(path)]) == 2


def test_config_errors_exit_1(tmp_path, capsys):
    path, _ = write_cfg(tmp_path, "solver.tol = 1e-8")
    for cmd in (["solve"], ["verify"], ["oracle"], ["sweep", "--s", "0.5", "--p", "2"]):
        assert main([cmd[0], str(path), *cmd[1:]]) == 1
    err = capsys.readouterr().err.strip().splitlines()
    assert len(err) == 4 and all("solver.tol" in line for line in err)
    assert main(["solve", str(tmp_path / "missing.cfg")]) == 1


def test_oracle_needs_p2(tmp_path):
    path, _ = write_cfg(tmp_path, "kernel.p = 3")
    assert main(["oracle", str(path)]) == 1


def test_oracle_2d(tmp_path):
    path, out = write_cfg(tmp_path, "grid.dim = 2\ngrid.h = 1/12\nkernel.s = 0.4")
    assert main(["oracle", str(path)]) == 0
    assert json.loads((out / "oracle.json").read_text())["rel_diff"] <= 1e-8


def test_sweep(tmp_path):
    path, out = write_cfg(tmp_path, "grid.N = 32")
    assert main(["sweep", str(path), "--s", "0.3,0.5,0.7", "--p", "1.5,2,3"]) == 0
    with open(out / "sweep.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 9
    assert list(rows[0]) == ["s", "p", "N", "lambda", "iterations", "converged"]
    assert all(r["converged"] == "True" for r in rows)


@pytest.mark.parametrize("s,p", [("0.5", ""), ("", "2"), ("0.5", "a"), ("1.5", "2"), ("0.5", "1")])
def test_sweep_bad_lists(tmp_path, s, p):
    path, _ = write_cfg(tmp_path, "grid.N = 8")
    assert main(["sweep", str(path), "--s", s, "--p", p]) == 1


def test_sweep_parallel_matches_serial(tmp_path):
    path, out = write_cfg(tmp_path, "grid.N = 16")
    main(["sweep", str(path), "--s", "0.3,0.6", "--p", "2,3"])
    serial = (out / "sweep.csv").read_bytes()
    main(["sweep", str(path), "--s", "0.3,0.6", "--p", "2,3", "--jobs", "2"])
    assert (out / "sweep.csv").read_bytes() == serial


def test_verify_passes_and_is_deterministic(tmp_path):
    path, out = write_cfg(tmp_path, "grid.N = 24\nkernel.p = 2.5" + SMALL_VERIFY)
    assert main(["verify", str(path)]) == 0
    rdir = out / "reports"
    first = {f.name: f.read_bytes() for f in sorted(rdir.iterdir())}
    assert "summary.json" in first and "hidden_convexity.json" in first
    assert "level_decay.csv" in first and "truncation_sequence.json" in first
    assert main(["verify", str(path), "--jobs", "2"]) == 0
    second = {f.name: f.read_bytes() for f in sorted(rdir.iterdir())}
    assert first == second
    summary = json.loads(first["summary.json"])
    assert summary["passed"] and len(summary["properties"]) >= 10


def test_verify_fault_detected(tmp_path, capsys):
    path, out = write_cfg(tmp_path, "grid.N = 24" + SMALL_VERIFY)
    assert main(["verify", str(path), "--fault", "negate-tails"]) == 3
    err = capsys.readouterr().err
    assert "first_mode_minimality" in err and "worst trial" in err
    summary = json.loads((out / "reports" / "summary.json").read_text())
    assert not summary["passed"]


def test_verify_2d_lshape(tmp_path):
    path, _ = write_cfg(tmp_path, "grid.dim = 2\ngrid.box = -1, 1, -1, 1\ngrid.h = 1/4\ngrid.mask = lshape\nkernel.p = 1.5"
                        + SMALL_VERIFY)
    assert main(["verify", str(path)]) == 0


def test_console_script(tmp_path):
    path, out = write_cfg(tmp_path, "grid.N = 8")
    proc = subprocess.run([sys.executable, "-m", "fraceig.cli", "solve", str(path)], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert (out / "result.json").exists()
    proc = subprocess.run([sys.executable, "-m", "fraceig.cli", "solve", str(tmp_path / "nope.cfg")],
                          capture_output=True, text=True)
    assert proc.returncode == 1
    assert len(proc.stderr.strip().splitlines()) == 1
