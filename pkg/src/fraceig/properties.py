"""Randomized checks of the structural inequalities and boundedness diagnostics.

Every ``check_*`` returns a :class:`PropertyReport`.  Random streams are
derived from ``(seed, trial)`` so results do not depend on execution order.
The ``*_diagnostic`` functions emit tables of empirical constants; they
assert only finiteness (and, for the truncation sequence, monotonicity).
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .energy import energy, lp_norm_p, phi_p, rayleigh
from .grid import Assembly, Grid
from .solver import EigenResult, normalize

__all__ = [
    "PropertyReport",
    "check_hidden_convexity",
    "check_truncation_inequality",
    "check_abs_decrease",
    "check_proportionality",
    "check_first_mode_minimality",
    "geodesic",
    "level_decay_diagnostic",
    "truncation_sequence_diagnostic",
    "linfty_bound_diagnostic",
]

DEFAULT_T = tuple(round(0.1 * k, 1) for k in range(1, 10))


@dataclass
class PropertyReport:
    name: str
    trials: int = 0
    violations: int = 0
    worst_slack: float = math.inf
    details: list = field(default_factory=list)
    tolerance: float = 0.0
    strict: bool = False

    @property
    def passed(self) -> bool:
        return self.violations == 0

    def record(self, margin: float, **info):
        """Register one trial.

        A margin below ``-tolerance`` is a violation; with ``strict`` a zero
        margin is one too.
        """
        self.trials += 1
        bad = margin < -self.tolerance or (self.strict and margin <= 0)
        self.violations += int(bad)
        if margin < self.worst_slack:
            self.worst_slack = float(margin)
        if bad or len(self.details) < 20:
            self.details.append({"margin": float(margin), "violation": bool(bad), **info})

    def to_dict(self) -> dict:
        d = asdict(self)
        d["passed"] = self.passed
        if math.isinf(d["worst_slack"]):
            d["worst_slack"] = None
        return d


def _rng(seed, trial):
    return np.random.default_rng([int(seed), int(trial)])


def geodesic(u, v, t, p):
    """Curve ``((1-t) v^p + t u^p)^(1/p)`` between nonnegative functions."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    return ((1.0 - t) * v**p + t * u**p) ** (1.0 / p)


def check_hidden_convexity(
    A: Assembly, trials: int = 200, t_values=DEFAULT_T, seed: int = 0, rtol: float = 1e-10
) -> PropertyReport:
    """Energy convexity along ``sigma_t`` for random positive pairs.

    The margin is ``((1-t) E(v) + t E(u) - E(sigma_t)) / max(E(u), E(v))``.
    """
    t_values = [float(t) for t in t_values]
    if any(t < 0 or t > 1 for t in t_values):
        raise ValueError("t values must lie in [0, 1]")
    p = A.p
    rep = PropertyReport("hidden_convexity", tolerance=rtol)
    for k in range(trials):
        rng = _rng(seed, k)
        u = rng.uniform(0.1, 1.1, size=A.size)
        v = rng.uniform(0.1, 1.1, size=A.size)
        Eu, Ev = energy(A, u).total, energy(A, v).total
        scale = max(Eu, Ev)
        for t in t_values:
            Es = energy(A, geodesic(u, v, t, p)).total
            rep.record(((1 - t) * Ev + t * Eu - Es) / scale, trial=k, t=t)
    return rep


def check_truncation_inequality(
    p: float, samples: int = 10_000, seed: int = 0, atol: float = 1e-12
) -> PropertyReport:
    """``phi_p(a - b)(a+ - b+) >= |a+ - b+|^p`` on random scalar pairs.

    Margins are relative to ``max(1, |a+ - b+|^p)``.
    """
    rep = PropertyReport("truncation_inequality", tolerance=atol)
    rng = _rng(seed, 0)
    a = rng.uniform(-2.0, 2.0, size=samples)
    b = rng.uniform(-2.0, 2.0, size=samples)
    # include the degenerate and equal-sign cases explicitly
    a[:4] = [1.0, 0.0, 0.5, -0.5]
    b[:4] = [-1.0, 0.0, 0.25, -1.0]
    ap, bp = np.maximum(a, 0.0), np.maximum(b, 0.0)
    lhs = phi_p(a - b, p) * (ap - bp)
    rhs = np.abs(ap - bp) ** p
    margin = (lhs - rhs) / np.maximum(1.0, rhs)
    for k in range(samples):
        rep.record(margin[k], trial=k, a=float(a[k]), b=float(b[k]))
    return rep


def check_abs_decrease(A: Assembly, trials: int = 100, seed: int = 0) -> PropertyReport:
    """``E(|u|) <= E(u)``, strictly when a weighted pair changes sign.

    A trial with a sign-changing weighted pair and zero margin counts as a
    violation of strictness.
    """
    rep = PropertyReport("abs_decrease", tolerance=0.0)
    I, J = A.pairs
    for k in range(trials):
        u = _rng(seed, k).uniform(-1.0, 1.0, size=A.size)
        E, Ea = energy(A, u).total, energy(A, np.abs(u)).total
        margin = (E - Ea) / max(E, 1e-300)
        strict = bool(np.any((u[I] * u[J] < 0) & (A.w > 0)))
        if strict and margin <= 0:
            margin = -math.inf
        rep.record(margin, trial=k, strict_expected=strict)
    return rep


def check_proportionality(u1, u2, tol: float = 1e-6, p: float = 2.0, grid: Grid | None = None):
    """Sup-distance of two functions after L^p and sign normalization.

    Also reports the variance of the ratio ``u1 / u2`` (before
    normalization) over nodes with ``|u2| > 1e-12``.
    """
    u1 = np.asarray(u1, dtype=float)
    u2 = np.asarray(u2, dtype=float)
    if u1.shape != u2.shape:
        raise ValueError(f"shape mismatch {u1.shape} vs {u2.shape}")
    h, n = (grid.h, grid.n) if grid is not None else (1.0, 1)
    a = normalize(u1, p, h, n)
    b = normalize(u2, p, h, n)
    dist = float(np.max(np.abs(a - b)))
    sel = np.abs(u2) > 1e-12
    ratio_var = float(np.var(u1[sel] / u2[sel])) if sel.any() else float("nan")
    rep = PropertyReport("proportionality", tolerance=0.0)
    rep.record(tol - dist, sup_distance=dist, ratio_variance=ratio_var)
    return rep


def check_first_mode_minimality(
    A: Assembly, res: EigenResult, probes: int = 10_000, seed: int = 0, rtol: float = 1e-10
) -> PropertyReport:
    """No probe has a Rayleigh quotient below the converged eigenvalue.

    Probes cycle through uniform signed, uniform positive and small
    perturbations of the computed eigenfunction.
    """
    rep = PropertyReport("first_mode_minimality", tolerance=rtol)
    lam = res.lam
    scale = np.max(np.abs(res.u))
    for k in range(probes):
        rng = _rng(seed, k)
        kind = k % 3
        if kind == 0:
            phi = rng.uniform(-1.0, 1.0, size=A.size)
        elif kind == 1:
            phi = rng.uniform(0.0, 1.0, size=A.size)
        else:
            eps = 10.0 ** rng.uniform(-6, -1)
            phi = res.u + eps * scale * rng.standard_normal(A.size)
        if not np.any(phi):
            continue
        rep.record((rayleigh(A, phi) - lam) / abs(lam), trial=k, kind=["signed", "positive", "perturbed"][kind])
    return rep


def level_decay_diagnostic(u, k_values, s: float, p: float, h: float = 1.0, n: int = 1) -> list[dict]:
    """Empirical constant of the level-set decay estimate.

    Each row holds ``lhs = h^n sum (u_i - k)_+``,
    ``rhs_base = k (h^n #{u > k})^(1 + eps)`` with ``eps = s p / (n (p - 1))``
    and their ratio (``None`` where the level set is empty).
    """
    u = np.asarray(u, dtype=float)
    if np.any(u < 0) or not np.any(u):
        raise ValueError("level decay needs a nonnegative nonzero function")
    eps = s * p / (n * (p - 1.0))
    hn = h**n
    rows = []
    for k in k_values:
        k = float(k)
        if not k > 0:
            raise ValueError(f"levels must be positive, got {k}")
        lhs = hn * float(np.sum(np.maximum(u - k, 0.0)))
        base = k * (hn * int(np.sum(u > k))) ** (1.0 + eps)
        ratio = lhs / base if base > 0 else None
        row = {"k": k, "lhs": lhs, "rhs_base": base, "ratio": ratio}
        vals = [lhs, base] + ([ratio] if ratio is not None else [])
        if not all(math.isfinite(x) for x in vals):
            raise ArithmeticError(f"non-finite level decay entry at k={k}")
        rows.append(row)
    return rows


def truncation_sequence_diagnostic(
    u, p: float, h: float = 1.0, n: int = 1, kmax: int = 16, normalize_input: bool = True
) -> list[dict]:
    """Norms ``U_k = ||(u - (1 - 2^-k))_+||_p^p`` for ``k = 1..kmax``.

    ``u`` is first scaled to unit L^p norm unless ``normalize_input`` is
    false.  Raises if the sequence ever increases.
    """
    u = np.asarray(u, dtype=float)
    if np.any(u < 0):
        raise ValueError("truncation sequence needs a nonnegative function")
    if normalize_input and np.any(u):
        u = u / lp_norm_p(u, p, h, n) ** (1.0 / p)
    rows = []
    prev = math.inf
    for k in range(1, kmax + 1):
        wk = np.maximum(u - (1.0 - 2.0**-k), 0.0)
        Uk = lp_norm_p(wk, p, h, n)
        if not (math.isfinite(Uk) and Uk <= prev):
            raise ArithmeticError(f"U_k increased at k={k}: {Uk} > {prev}")
        rows.append({"k": k, "U_k": Uk})
        prev = Uk
    return rows


def linfty_bound_diagnostic(results) -> list[dict]:
    """Ratio ``sup|u| / ||u||_1`` for each solve result."""
    rows = []
    for r in results:
        u = np.abs(np.asarray(r.u, dtype=float))
        hn = r.grid.cell_volume
        sup, l1 = float(u.max()), hn * float(u.sum())
        ratio = sup / l1
        if not all(math.isfinite(x) for x in (sup, l1, ratio)):
            raise ArithmeticError("non-finite L1 -> Linf entry")
        rows.append({"grid": r.grid.size, "h": r.grid.h, "sup_norm": sup, "l1_norm": l1, "ratio": ratio})
    return rows
