"""Full verification run driven by a configuration.

``run_verify`` solves the configured problem, runs every property check
and diagnostic, and returns plain dictionaries ready for serialization.
Output depends only on the configuration (no timings), so repeated runs
produce identical bytes whatever the number of worker processes.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from itertools import combinations

import numpy as np

from .config import (
    assembly_options,
    grid_from_config,
    kernel_from_config,
    solve_options,
)
from .grid import AssemblyOptions, assemble, build_grid_1d, build_grid_2d, scaled_grid
from .properties import (
    PropertyReport,
    check_abs_decrease,
    check_first_mode_minimality,
    check_hidden_convexity,
    check_proportionality,
    check_truncation_inequality,
    level_decay_diagnostic,
    linfty_bound_diagnostic,
    truncation_sequence_diagnostic,
)
from .solver import is_reflection_invariant, minimize_rayleigh, solve_odd

__all__ = ["FAULTS", "run_verify", "enlarged_grid", "solve_many"]

FAULTS = ("negate-tails",)


def enlarged_grid(grid):
    """Grid on a larger domain with the same spacing containing ``grid``'s nodes."""
    d = grid.descriptor
    if d["kind"] == "interval":
        a, b = d["a"], d["b"]
        N = grid.size
        L = b - a
        return build_grid_1d(a - L / 2, b + L / 2, 2 * N)
    x0, x1, y0, y1 = d["box"]
    nx, ny = d["mask"].shape
    f = 2 if (nx % 2 == 0 and ny % 2 == 0) else 3
    ex, ey = (f - 1) * (x1 - x0) / 2, (f - 1) * (y1 - y0) / 2
    return build_grid_2d((x0 - ex, x1 + ex, y0 - ey, y1 + ey), grid.h, d["mask_name"])


def _solve_job(args):
    A, opts = args
    return minimize_rayleigh(A, opts)


def solve_many(jobs_args, jobs=1):
    if jobs > 1 and len(jobs_args) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            return list(ex.map(_solve_job, jobs_args))
    return [_solve_job(a) for a in jobs_args]


def _result_summary(res):
    return {
        "lambda": res.lam,
        "iterations": res.iterations,
        "grad_norm": res.grad_norm,
        "residual": res.residual,
        "converged": res.converged,
    }


def run_verify(cfg: dict, fault: str | None = None, jobs: int = 1) -> dict:
    """Run all checks; returns ``{"reports": [...], "tables": {...}, "context": {...}}``."""
    if fault is not None and fault not in FAULTS:
        raise ValueError(f"unknown fault {fault!r}; choose from {FAULTS}")
    grid = grid_from_config(cfg)
    kernel = kernel_from_config(cfg)
    A = assemble(grid, kernel, assembly_options(cfg))
    A_check = A.with_tails(-A.t) if fault == "negate-tails" else A
    vseed = cfg["verify.seed"]
    base = solve_options(cfg, mode="first", enforce_sign=True)

    seeds = [cfg["solve.seed"] + k for k in range(max(1, cfg["verify.seeds"]))]
    runs = solve_many([(A, solve_options(cfg, mode="first", enforce_sign=True, seed=sd)) for sd in seeds], jobs)
    main = runs[0]
    reports: list[PropertyReport] = []

    reports.append(
        check_hidden_convexity(A_check, cfg["verify.convexity_trials"], seed=vseed)
    )
    reports.append(
        check_truncation_inequality(kernel.p, cfg["verify.truncation_samples"], seed=vseed)
    )
    reports.append(check_abs_decrease(A_check, cfg["verify.abs_trials"], seed=vseed))
    reports.append(check_first_mode_minimality(A_check, main, cfg["verify.probes"], seed=vseed))

    conv = PropertyReport("solver_convergence")
    for sd, r in zip(seeds, runs):
        conv.record(0.0 if r.converged else -math.inf, seed=sd, status=r.status, **_result_summary(r))
    reports.append(conv)

    pos = PropertyReport("first_mode_positivity", strict=True)
    for sd, r in zip(seeds, runs):
        pos.record(float(r.u.min()) if r.converged else -math.inf, seed=sd)
    reports.append(pos)

    prop = PropertyReport("proportionality", tolerance=0.0)
    tol = cfg["verify.proportionality_tol"]
    for (i, ri), (j, rj) in combinations(enumerate(runs), 2):
        sub = check_proportionality(ri.u, rj.u, tol, kernel.p, grid)
        d = sub.details[0]
        prop.record(tol - d["sup_distance"], seeds=[seeds[i], seeds[j]], sup_distance=d["sup_distance"])
    reports.append(prop)

    if grid.symmetry_map is not None and is_reflection_invariant(A) and grid.size > 1:
        odd = solve_odd(A, base)
        margin = odd.lam / main.lam - 1.0
        rep = PropertyReport("sign_changing_margin")
        both = bool(odd.u.max() > 0 > odd.u.min())
        ok_margin = margin - cfg["verify.odd_margin"]
        rep.record(ok_margin if (both and odd.converged) else -math.inf,
                   lambda_first=main.lam, lambda_odd=odd.lam, ratio_minus_one=margin,
                   attains_both_signs=both, odd_converged=odd.converged)
        reports.append(rep)

    # exact homogeneity of the collocation scheme, near field off
    c = 2.0
    A1 = A if cfg["assembly.near_field_radius"] == 0 else assemble(
        grid, kernel, AssemblyOptions(0, cfg["assembly.tail_refine"]))
    A2 = assemble(scaled_grid(grid, c), kernel, AssemblyOptions(0, cfg["assembly.tail_refine"]))
    r1 = main if A1 is A else minimize_rayleigh(A1, base)
    r2 = minimize_rayleigh(A2, base)
    expected = c ** (-kernel.sp) * r1.lam
    rel = abs(r2.lam / expected - 1.0)
    rep = PropertyReport("scaling")
    rep.record(cfg["verify.scaling_rtol"] - rel if (r1.converged and r2.converged) else -math.inf,
               factor=c, lambda_unit=r1.lam, lambda_scaled=r2.lam, rel_error=rel)
    reports.append(rep)

    big = enlarged_grid(grid)
    rb = minimize_rayleigh(assemble(big, kernel, assembly_options(cfg)), base)
    rep = PropertyReport("domain_monotonicity")
    gap = main.lam - rb.lam
    rep.record(gap / main.lam if (rb.converged and gap > 0) else -abs(gap / main.lam) - 1.0,
               lambda_small=main.lam, lambda_large=rb.lam, nodes_small=grid.size, nodes_large=big.size)
    reports.append(rep)

    umax = float(main.u.max())
    levels = umax * np.logspace(-3, np.log10(0.999), cfg["verify.levels"])
    tables = {
        "level_decay": level_decay_diagnostic(main.u, levels, kernel.s, kernel.p, grid.h, grid.n),
        "truncation_sequence": truncation_sequence_diagnostic(main.u, kernel.p, grid.h, grid.n),
        "linfty_bound": linfty_bound_diagnostic([main, r2, rb]),
    }
    context = {
        "nodes": grid.size,
        "h": grid.h,
        "fault": fault,
        "first_mode": _result_summary(main),
    }
    return {"reports": [r.to_dict() for r in reports], "tables": tables, "context": context}
