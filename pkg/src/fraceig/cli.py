"""``frac-eig`` command line: solve, verify, sweep, oracle.

Exit codes: 0 success, 1 configuration or I/O error, 2 solver hit
``max_iters`` (solve), 3 property violation (verify).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import __version__
from .config import (
    ConfigError,
    assembly_options,
    config_hash,
    grid_from_config,
    kernel_from_config,
    load_config,
    solve_options,
)
from .grid import GridError, assemble
from .kernel import KernelError, make_kernel
from .solver import dense_oracle_p2, is_reflection_invariant, minimize_rayleigh, residual, solve_odd
from .suite import FAULTS, run_verify

log = logging.getLogger("fraceig")

SCHEMA_VERSION = 1


def atomic_write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False, default=_jsonable) + "\n"


def _jsonable(x):
    if hasattr(x, "tolist"):
        return x.tolist()
    if hasattr(x, "item"):
        return x.item()
    raise TypeError(f"not serializable: {type(x).__name__}")


def _clean(obj):
    # JSON has no inf/nan; encode them as strings
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj


def _csv(rows, columns) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n", extrasaction="ignore")
    w.writeheader()
    for r in rows:
        w.writerow({k: ("" if r.get(k) is None else (repr(r[k]) if isinstance(r[k], float) else r[k])) for k in columns})
    return buf.getvalue()


def _outdir(cfg) -> Path:
    return Path(cfg["output.directory"])


def _record_base(cfg):
    return {
        "schema_version": SCHEMA_VERSION,
        "tool_version": __version__,
        "config": cfg,
        "config_hash": config_hash(cfg),
    }


def _eigenfunction_csv(grid, u) -> str:
    cols = ["node_index", "x"] + (["y"] if grid.n == 2 else []) + ["u"]
    rows = []
    for i in range(grid.size):
        r = {"node_index": i, "x": float(grid.nodes[i, 0]), "u": float(u[i])}
        if grid.n == 2:
            r["y"] = float(grid.nodes[i, 1])
        rows.append(r)
    return _csv(rows, cols)


def cmd_solve(args) -> int:
    cfg = load_config(args.config)
    t0 = time.perf_counter()
    grid = grid_from_config(cfg)
    A = assemble(grid, kernel_from_config(cfg), assembly_options(cfg))
    opts = solve_options(cfg)
    res = solve_odd(A, opts) if opts.mode == "odd" else minimize_rayleigh(A, opts)
    weak = residual(A, res)
    rec = _record_base(cfg)
    rec.update(
        {
            "lambda": res.lam,
            "nodes": grid.size,
            "h": grid.h,
            "iterations": res.iterations,
            "grad_norm": res.grad_norm,
            "residual": res.residual,
            "weak_residual": weak,
            "converged": res.converged,
            "status": res.status,
            "wall_time": time.perf_counter() - t0,
        }
    )
    dump = cfg["output.dump_eigenfunction"]
    if dump:
        rec["eigenfunction"] = res.u.tolist()
    out = _outdir(cfg)
    atomic_write(out / "result.json", _json(_clean(rec)))
    if dump and "csv" in cfg["output.formats"]:
        atomic_write(out / "eigenfunction.csv", _eigenfunction_csv(grid, res.u))
    log.info("lambda = %r (%s after %d iterations)", res.lam, res.status, res.iterations)
    return 0 if res.converged else 2


def cmd_verify(args) -> int:
    cfg = load_config(args.config)
    out = run_verify(cfg, fault=args.fault, jobs=args.jobs)
    rdir = _outdir(cfg) / "reports"
    base = _record_base(cfg)
    failed = []
    for rep in out["reports"]:
        atomic_write(rdir / f"{rep['name']}.json", _json(_clean({**base, **rep})))
        if not rep["passed"]:
            failed.append(rep)
    tables = out["tables"]
    columns = {
        "level_decay": ["k", "lhs", "rhs_base", "ratio"],
        "truncation_sequence": ["k", "U_k"],
        "linfty_bound": ["grid", "h", "sup_norm", "l1_norm", "ratio"],
    }
    for name, rows in tables.items():
        if "json" in cfg["output.formats"]:
            atomic_write(rdir / f"{name}.json", _json(_clean({**base, "table": name, "rows": rows})))
        if "csv" in cfg["output.formats"]:
            atomic_write(rdir / f"{name}.csv", _csv(rows, columns[name]))
    summary = {
        **base,
        "context": out["context"],
        "properties": [
            {k: r[k] for k in ("name", "passed", "trials", "violations", "worst_slack")}
            for r in out["reports"]
        ],
        "passed": not failed,
    }
    atomic_write(rdir / "summary.json", _json(_clean(summary)))
    for rep in failed:
        worst = min((d for d in rep["details"] if d.get("violation")), key=lambda d: d["margin"], default={})
        print(
            f"frac-eig: property {rep['name']} violated "
            f"({rep['violations']}/{rep['trials']} trials, worst trial {_clean(worst)})",
            file=sys.stderr,
        )
    return 3 if failed else 0


def _parse_list(text, name):
    try:
        vals = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"--{name}: not a list of numbers: {text!r}") from None
    if not vals:
        raise ConfigError(f"--{name}: empty list")
    return vals


def _sweep_job(args):
    cfg, s, p = args
    row = {"s": s, "p": p, "N": None, "lambda": None, "iterations": None, "converged": False}
    try:
        grid = grid_from_config(cfg)
        row["N"] = grid.size
        k = make_kernel(s, p, grid.n, cfg["kernel.multiplier"], cfg["kernel.lam_lo"], cfg["kernel.lam_hi"])
        A = assemble(grid, k, assembly_options(cfg))
        res = minimize_rayleigh(A, solve_options(cfg, mode="first"))
        row.update({"lambda": res.lam, "iterations": res.iterations, "converged": res.converged})
    except (ArithmeticError, ValueError) as exc:
        row["error"] = str(exc)
    return row


def cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    s_list = _parse_list(args.s, "s")
    p_list = _parse_list(args.p, "p")
    if any(not 0 < s < 1 for s in s_list):
        raise ConfigError("--s values must lie in (0, 1)")
    if any(not p > 1 for p in p_list):
        raise ConfigError("--p values must exceed 1")
    jobs = [(cfg, s, p) for s in s_list for p in p_list]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as ex:
            rows = list(ex.map(_sweep_job, jobs))
    else:
        rows = [_sweep_job(j) for j in jobs]
    for r in rows:
        if "error" in r:
            log.warning("s=%g p=%g failed: %s", r["s"], r["p"], r["error"])
    atomic_write(
        _outdir(cfg) / "sweep.csv",
        _csv(rows, ["s", "p", "N", "lambda", "iterations", "converged"]),
    )
    return 0


def cmd_oracle(args) -> int:
    cfg = load_config(args.config)
    if cfg["kernel.p"] != 2.0:
        raise ConfigError(f"oracle needs kernel.p = 2, got {cfg['kernel.p']}")
    grid = grid_from_config(cfg)
    A = assemble(grid, kernel_from_config(cfg), assembly_options(cfg))
    opts = solve_options(cfg, mode="first")
    res = minimize_rayleigh(A, opts)
    orc = dense_oracle_p2(A)
    rel = abs(res.lam - orc.lambda_min) / abs(orc.lambda_min)
    rec = _record_base(cfg)
    rec.update(
        {
            "lambda_solver": res.lam,
            "lambda_oracle": orc.lambda_min,
            "rel_diff": rel,
            "solver_converged": res.converged,
            "nodes": grid.size,
        }
    )
    if orc.lambda_min_odd is not None and is_reflection_invariant(A):
        odd = solve_odd(A, opts)
        rec.update(
            {
                "lambda_odd_solver": odd.lam,
                "lambda_odd_oracle": orc.lambda_min_odd,
                "rel_diff_odd": abs(odd.lam - orc.lambda_min_odd) / abs(orc.lambda_min_odd),
            }
        )
    atomic_write(_outdir(cfg) / "oracle.json", _json(_clean(rec)))
    return 0 if rel <= 1e-8 else 2


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="frac-eig", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="compute the first eigenpair")
    p.add_argument("config")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("verify", help="run the property suite")
    p.add_argument("config")
    p.add_argument("--fault", choices=FAULTS, default=None, help="inject a known defect (test hook)")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("sweep", help="first eigenvalue over (s, p) pairs")
    p.add_argument("config")
    p.add_argument("--s", required=True, help="comma-separated orders")
    p.add_argument("--p", required=True, help="comma-separated exponents")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("oracle", help="compare with the dense p = 2 eigensolver")
    p.add_argument("config")
    p.set_defaults(func=cmd_oracle)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="frac-eig: %(message)s",
    )
    try:
        return args.func(args)
    except (ConfigError, GridError, KernelError, OSError) as exc:
        print(f"frac-eig: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
