"""Run configuration: a flat ``block.key = value`` text format.

Grammar, one entry per line::

    # comment (also allowed after a value)
    kernel.s = 0.5
    grid.box = 0, 1, 0, 1        # comma-separated lists
    grid.h = 1/12                # integers, decimals and fractions a/b
    solve.enforce_sign = true    # true/false/yes/no/on/off

Unknown keys, duplicate keys and malformed values are errors.
"""

from __future__ import annotations

import copy
import hashlib
import json
import os
from fractions import Fraction
from pathlib import Path

from .estimator import FractionalEigen
from .grid import MASKS, AssemblyOptions, build_grid_1d, build_grid_2d
from .kernel import MULTIPLIERS, make_kernel
from .solver import SolveOptions

__all__ = [
    "ConfigError",
    "SCHEMA",
    "default_config",
    "load_config",
    "parse_config",
    "config_hash",
    "grid_from_config",
    "kernel_from_config",
    "assembly_options",
    "solve_options",
    "estimator_from_config",
]

SEED_ENV = "FRAC_EIG_SEED"


class ConfigError(ValueError):
    pass


def _num(text):
    text = text.strip()
    try:
        if "/" in text:
            return float(Fraction(text))
        return float(text)
    except (ValueError, ZeroDivisionError):
        raise ConfigError(f"not a number: {text!r}") from None


def _int(text):
    v = _num(text)
    if v != int(v):
        raise ConfigError(f"not an integer: {text!r}")
    return int(v)


def _bool(text):
    t = text.strip().lower()
    if t in ("true", "yes", "on", "1"):
        return True
    if t in ("false", "no", "off", "0"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def _opt_bool(text):
    return None if text.strip().lower() == "auto" else _bool(text)


def _opt_num(text):
    return None if text.strip().lower() in ("none", "auto", "") else _num(text)


def _str(text):
    return text.strip()


def _nums(text):
    return [_num(x) for x in text.split(",") if x.strip()]


def _strs(text):
    return [x.strip() for x in text.split(",") if x.strip()]


# key -> (parser, default)
SCHEMA = {
    "kernel.s": (_num, 0.5),
    "kernel.p": (_num, 2.0),
    "kernel.multiplier": (_str, "one"),
    "kernel.lam_lo": (_opt_num, None),
    "kernel.lam_hi": (_opt_num, None),
    "grid.dim": (_int, 1),
    "grid.a": (_num, -1.0),
    "grid.b": (_num, 1.0),
    "grid.N": (_int, 64),
    "grid.box": (_nums, [0.0, 1.0, 0.0, 1.0]),
    "grid.h": (_num, 1.0 / 12.0),
    "grid.mask": (_str, "all"),
    "assembly.near_field_radius": (_int, 0),
    "assembly.tail_refine": (_int, 4),
    "solve.tol": (_num, 1e-10),
    "solve.max_iters": (_int, 50_000),
    "solve.seed": (_int, 0),
    "solve.mode": (_str, "first"),
    "solve.enforce_sign": (_bool, True),
    "solve.step0": (_num, 1.0),
    "solve.backtrack": (_num, 0.5),
    "solve.armijo": (_num, 1e-4),
    "solve.symmetrize": (_opt_bool, None),
    "output.directory": (_str, "out"),
    "output.formats": (_strs, ["json", "csv"]),
    "output.dump_eigenfunction": (_bool, False),
    "verify.seed": (_int, 0),
    "verify.convexity_trials": (_int, 200),
    "verify.truncation_samples": (_int, 10_000),
    "verify.abs_trials": (_int, 100),
    "verify.probes": (_int, 10_000),
    "verify.seeds": (_int, 10),
    "verify.proportionality_tol": (_num, 1e-6),
    "verify.odd_margin": (_num, 1e-3),
    "verify.scaling_rtol": (_num, 1e-12),
    "verify.levels": (_int, 20),
}


def default_config() -> dict:
    return {k: copy.deepcopy(v[1]) for k, v in SCHEMA.items()}


def parse_config(text: str, source: str = "<config>") -> dict:
    cfg = default_config()
    seen = set()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'block.key = value'")
        key, value = (x.strip() for x in line.split("=", 1))
        if key not in SCHEMA:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        if key in seen:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        seen.add(key)
        try:
            cfg[key] = SCHEMA[key][0](value)
        except ConfigError as exc:
            raise ConfigError(f"{source}:{lineno}: {key}: {exc}") from None
    if SEED_ENV in os.environ:
        try:
            cfg["solve.seed"] = int(os.environ[SEED_ENV])
        except ValueError:
            raise ConfigError(f"{SEED_ENV} must be an integer") from None
    validate(cfg)
    return cfg


def load_config(path) -> dict:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text, str(path))


def validate(cfg: dict):
    if cfg["kernel.multiplier"] not in MULTIPLIERS:
        raise ConfigError(f"unknown kernel.multiplier {cfg['kernel.multiplier']!r}")
    if cfg["grid.mask"] not in MASKS:
        raise ConfigError(f"unknown grid.mask {cfg['grid.mask']!r}")
    if cfg["grid.dim"] not in (1, 2):
        raise ConfigError("grid.dim must be 1 or 2")
    if len(cfg["grid.box"]) != 4:
        raise ConfigError("grid.box needs four numbers x0, x1, y0, y1")
    if cfg["solve.mode"] not in ("first", "odd"):
        raise ConfigError("solve.mode must be 'first' or 'odd'")
    bad = set(cfg["output.formats"]) - {"json", "csv"}
    if bad:
        raise ConfigError(f"unknown output formats {sorted(bad)}")
    if cfg["assembly.near_field_radius"] < 0 or cfg["assembly.tail_refine"] < 1:
        raise ConfigError("assembly.near_field_radius >= 0 and assembly.tail_refine >= 1")
    try:
        kernel_from_config(cfg)
        solve_options(cfg)
        grid_from_config(cfg)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def config_hash(cfg: dict) -> str:
    """SHA-256 of the canonical config, output location excluded."""
    body = {k: v for k, v in sorted(cfg.items()) if k != "output.directory"}
    blob = json.dumps(body, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def grid_from_config(cfg: dict):
    if cfg["grid.dim"] == 1:
        return build_grid_1d(cfg["grid.a"], cfg["grid.b"], cfg["grid.N"])
    return build_grid_2d(cfg["grid.box"], cfg["grid.h"], cfg["grid.mask"])


def kernel_from_config(cfg: dict):
    return make_kernel(
        cfg["kernel.s"], cfg["kernel.p"], cfg["grid.dim"],
        cfg["kernel.multiplier"], cfg["kernel.lam_lo"], cfg["kernel.lam_hi"],
    )


def assembly_options(cfg: dict) -> AssemblyOptions:
    return AssemblyOptions(cfg["assembly.near_field_radius"], cfg["assembly.tail_refine"])


def solve_options(cfg: dict, **overrides) -> SolveOptions:
    kw = dict(
        tol=cfg["solve.tol"],
        max_iters=cfg["solve.max_iters"],
        step0=cfg["solve.step0"],
        backtrack=cfg["solve.backtrack"],
        armijo=cfg["solve.armijo"],
        enforce_sign=cfg["solve.enforce_sign"],
        seed=cfg["solve.seed"],
        mode=cfg["solve.mode"],
        symmetrize=cfg["solve.symmetrize"],
    )
    kw.update(overrides)
    return SolveOptions(**kw)


def estimator_from_config(cfg: dict) -> FractionalEigen:
    return FractionalEigen(
        s=cfg["kernel.s"],
        p=cfg["kernel.p"],
        multiplier=cfg["kernel.multiplier"],
        lam_lo=cfg["kernel.lam_lo"],
        lam_hi=cfg["kernel.lam_hi"],
        mode=cfg["solve.mode"],
        tol=cfg["solve.tol"],
        max_iters=cfg["solve.max_iters"],
        step0=cfg["solve.step0"],
        backtrack=cfg["solve.backtrack"],
        armijo=cfg["solve.armijo"],
        enforce_sign=cfg["solve.enforce_sign"],
        seed=cfg["solve.seed"],
        symmetrize=cfg["solve.symmetrize"],
        near_field_radius=cfg["assembly.near_field_radius"],
        tail_refine=cfg["assembly.tail_refine"],
    )
