"""First eigenpair by projected gradient descent on the discrete L^p sphere.

The iteration is ``u <- normalize(P(u - tau * grad R(u)))`` where ``P`` is
either the absolute value (first mode), the odd projection (sign-changing
mode) or the identity.  ``tau`` starts from a Barzilai-Borwein estimate
and is backtracked until the Armijo condition holds, so the recorded
Rayleigh history never increases.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
import scipy.linalg

from .energy import (
    apply_operator,
    check_grid_function,
    form,
    lp_norm_p,
    phi_p,
    rayleigh,
    rayleigh_gradient,
)
from .grid import Assembly, Grid, GridError, reflect

__all__ = [
    "SolveOptions",
    "EigenResult",
    "OracleResult",
    "minimize_rayleigh",
    "solve_odd",
    "dense_oracle_p2",
    "operator_matrix_p2",
    "residual",
    "normalize",
    "is_reflection_invariant",
    "symmetry_group",
]


@dataclass
class SolveOptions:
    """Stopping and line-search controls.

    ``step0`` is the first trial step relative to ``||u|| / ||grad||``,
    which keeps the iteration invariant under rescaling of the domain.
    ``symmetrize`` restricts first-mode iterates to functions invariant
    under the weight-preserving lattice symmetries; ``None`` enables it for
    p < 2, where ties ``u_i = u_g(i)`` at the minimizer make the energy
    non-smooth and plain gradient descent sublinear.
    """

    tol: float = 1e-10
    max_iters: int = 50_000
    step0: float = 1.0
    backtrack: float = 0.5
    armijo: float = 1e-4
    enforce_sign: bool = True
    seed: int = 0
    mode: str = "first"
    symmetrize: bool | None = None

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if not 0 < self.backtrack < 1:
            raise ValueError("backtrack must lie in (0, 1)")
        if not 0 < self.armijo < 1:
            raise ValueError("armijo must lie in (0, 1)")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.mode not in ("first", "odd"):
            raise ValueError(f"mode must be 'first' or 'odd', got {self.mode!r}")


@dataclass
class EigenResult:
    lam: float
    u: np.ndarray
    grid: Grid
    p: float
    iterations: int
    grad_norm: float
    residual: float
    converged: bool
    history: list = field(default_factory=list, repr=False)
    status: str = ""

    @property
    def h(self) -> float:
        return self.grid.h


def normalize(u, p, h=1.0, n=1) -> np.ndarray:
    """Scale to unit discrete L^p norm with the largest-magnitude entry positive."""
    u = np.asarray(u, dtype=float)
    nrm = lp_norm_p(u, p, h, n) ** (1.0 / p)
    if nrm == 0.0:
        raise ValueError("cannot normalize the zero function")
    u = u / nrm
    if u[np.argmax(np.abs(u))] < 0:
        u = -u
    return u


def _pow_change(y, d, p):
    # |y + d|^p - |y|^p, accurate for |d| << |y|
    z = y + d
    out = np.abs(z) ** p - np.abs(y) ** p
    same = (y != 0) & (np.sign(z) == np.sign(y))
    ay = np.abs(y[same])
    out[same] = ay**p * np.expm1(p * np.log1p(np.sign(y[same]) * d[same] / ay))
    return out


def _rayleigh_change(A: Assembly, u, v, R_u: float) -> float:
    """``R(v) - R(u)`` from termwise increments; resolves changes below ulp(R)."""
    I, J = A.pairs
    p = A.p
    du = v - u
    dE = 2.0 * np.sum(A.w * _pow_change(u[I] - u[J], du[I] - du[J], p))
    dT = _pow_change(u, du, p)
    dE += np.sum(A.t * dT)
    hn = A.grid.cell_volume
    L_u = hn * np.sum(np.abs(u) ** p)
    dL = hn * np.sum(dT)
    return float((dE - R_u * dL) / (L_u + dL))


def _preserves(A: Assembly, perm, rtol=1e-12) -> bool:
    W = A.W
    return bool(
        np.allclose(W[np.ix_(perm, perm)], W, rtol=rtol, atol=0)
        and np.allclose(A.t[perm], A.t, rtol=rtol, atol=0)
    )


def is_reflection_invariant(A: Assembly, rtol: float = 1e-12) -> bool:
    """Whether the weights are unchanged by the grid reflection."""
    sigma = A.grid.symmetry_map
    return sigma is not None and _preserves(A, sigma, rtol)


def symmetry_group(A: Assembly) -> list:
    """Lattice symmetries of the grid that also preserve the weights."""
    return [g for g in A.grid.symmetries if _preserves(A, g)]


def _strong_residual(A: Assembly, u, lam) -> float:
    hn = A.grid.cell_volume
    r = hn * (-apply_operator(A, u)) - lam * hn * phi_p(u, A.p)
    return float(np.max(np.abs(r)) / lam) if lam != 0 else float(np.max(np.abs(r)))


def minimize_rayleigh(A: Assembly, opts: SolveOptions | None = None, init=None) -> EigenResult:
    """Minimize the Rayleigh quotient; returns the first eigenpair.

    Non-convergence is reported through ``converged``/``status``; it does
    not raise.  With ``mode='odd'`` the iterate is kept in the odd subspace
    of the grid reflection (see ``solve_odd``).
    """
    opts = opts or SolveOptions()
    grid = A.grid
    p, h, n = A.p, grid.h, grid.n
    odd = opts.mode == "odd"
    if odd and grid.symmetry_map is None:
        raise GridError("odd mode needs a grid with a symmetry map")
    enforce_sign = opts.enforce_sign and not odd
    group = symmetry_group(A) if not odd else []
    even = opts.symmetrize
    if even is None:
        even = p < 2 and len(group) > 1
    even = bool(even) and not odd
    if even and len(group) < 2:
        raise GridError("symmetrize needs a grid with a weight-preserving symmetry")

    def average(v):
        return sum(v[g] for g in group) / len(group)

    def project(v):
        if odd:
            v = 0.5 * (v - reflect(grid, v))
        elif even:
            v = average(v)
        if enforce_sign:
            v = np.abs(v)
        return v

    if init is None:
        rng = np.random.default_rng(opts.seed)
        u = rng.uniform(0.5, 1.5, size=A.size)
        if odd:
            u = rng.uniform(-1.0, 1.0, size=A.size)
    else:
        u = check_grid_function(A, init, "init").copy()
        if not np.any(u):
            raise ValueError("initial guess must be nonzero")
    u = project(u)
    if not np.any(u):
        raise ValueError("initial guess vanishes after projection")
    u = normalize(u, p, h, n)

    def grad(v, Rv):
        g = rayleigh_gradient(A, v, Rv)
        if odd:
            g = 0.5 * (g - reflect(grid, g))
        elif even:
            g = average(g)
        return g

    R = rayleigh(A, u)
    g = grad(u, R)
    history = [R]
    tau = None
    u_prev = g_prev = None
    converged = False
    status = "max_iters"
    it = 0
    gnorm = float(np.max(np.abs(g)))
    while True:
        if gnorm <= opts.tol:
            converged, status = True, "converged"
            break
        if it >= opts.max_iters:
            break
        g2 = float(g @ g)
        if u_prev is None:
            tau = opts.step0 * np.sqrt(float(u @ u) / g2)
        else:
            du, dg = u - u_prev, g - g_prev
            curv = float(du @ dg)
            tau = float(du @ du) / curv if curv > 0 else 2.0 * tau
        accepted = False
        for _ in range(60):
            cand = project(u - tau * g)
            if np.any(cand):
                cand = normalize(cand, p, h, n)
                dR = _rayleigh_change(A, u, cand, R)
                if dR <= -opts.armijo * tau * g2:
                    accepted = True
                    break
            tau *= opts.backtrack
        if not accepted:
            status = "stalled"
            break
        u_prev, g_prev = u, g
        u, R = cand, R + dR
        g = grad(u, R)
        gnorm = float(np.max(np.abs(g)))
        history.append(R)
        it += 1

    return EigenResult(
        lam=rayleigh(A, u),
        u=u,
        grid=grid,
        p=p,
        iterations=it,
        grad_norm=gnorm,
        residual=_strong_residual(A, u, R),
        converged=converged,
        history=history,
        status=status,
    )


def solve_odd(A: Assembly, opts: SolveOptions | None = None, init=None) -> EigenResult:
    """Sign-changing critical point restricted to odd functions.

    The iterate is projected onto ``u = -reflect(u)`` after every step; the
    sign constraint is disabled.
    """
    opts = opts or SolveOptions()
    o = SolveOptions(**{**opts.__dict__, "mode": "odd", "enforce_sign": False})
    res = minimize_rayleigh(A, o, init)
    u = res.u
    if not (u.max() > 0 > u.min()):
        raise ArithmeticError("odd mode failed to produce a sign-changing function")
    return res


def operator_matrix_p2(A: Assembly) -> np.ndarray:
    """Symmetric matrix ``M`` with ``h^n <M u, u> = energy(u)`` for p = 2."""
    hn = A.grid.cell_volume
    W = A.W
    M = -2.0 * W
    M[np.diag_indices_from(M)] = 2.0 * W.sum(axis=1) + A.t
    return M / hn


def _odd_basis(grid: Grid) -> np.ndarray:
    sigma = grid.symmetry_map
    idx = np.arange(grid.size)
    lead = idx[idx < sigma]
    Q = np.zeros((grid.size, len(lead)))
    Q[lead, np.arange(len(lead))] = np.sqrt(0.5)
    Q[sigma[lead], np.arange(len(lead))] = -np.sqrt(0.5)
    return Q


class OracleResult(NamedTuple):
    lambda_min: float
    vector: np.ndarray
    lambda_min_odd: float | None
    spectrum: np.ndarray


def dense_oracle_p2(A: Assembly) -> OracleResult:
    """Smallest eigenpair of the assembled p = 2 matrix by dense ``eigh``.

    The vector is normalized like solver output.  When the grid has a
    reflection, the smallest eigenvalue on odd functions is included.
    """
    if A.p != 2.0:
        raise ValueError(f"dense oracle requires p = 2, got p = {A.p}")
    M = operator_matrix_p2(A)
    vals, vecs = scipy.linalg.eigh(M)
    grid = A.grid
    vec = normalize(vecs[:, 0], 2.0, grid.h, grid.n)
    lam_odd = None
    if grid.symmetry_map is not None:
        Q = _odd_basis(grid)
        if Q.shape[1] > 0:
            lam_odd = float(scipy.linalg.eigh(Q.T @ M @ Q, eigvals_only=True)[0])
    return OracleResult(float(vals[0]), vec, lam_odd, vals)


def residual(A: Assembly, res: EigenResult, n_tests: int = 64, seed: int = 0) -> float:
    """Weak-formulation defect against random unit-sup-norm test functions.

    Returns ``max |form(u, eta) - lam h^n sum phi_p(u_i) eta_i| / lam``.
    """
    u = check_grid_function(A, res.u)
    hn = A.grid.cell_volume
    rng = np.random.default_rng(seed)
    pu = phi_p(u, A.p)
    worst = 0.0
    for _ in range(n_tests):
        eta = rng.uniform(-1.0, 1.0, size=A.size)
        eta /= np.max(np.abs(eta))
        d = abs(form(A, u, eta) - res.lam * hn * float(pu @ eta))
        worst = max(worst, d)
    return worst / abs(res.lam)
