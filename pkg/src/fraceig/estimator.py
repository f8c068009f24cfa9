"""Estimator-style front end composing assembly and solve.

>>> from fraceig import FractionalEigen, build_grid_1d
>>> est = FractionalEigen(s=0.5, p=2.0).fit(build_grid_1d(-1, 1, 16))
>>> round(est.eigenvalue_, 6) > 0
True
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .grid import AssemblyOptions, Grid, assemble
from .kernel import make_kernel
from .solver import SolveOptions, minimize_rayleigh, residual, solve_odd

__all__ = ["FractionalEigen", "check_grid", "check_order", "check_exponent"]


def check_order(s) -> float:
    s = float(s)
    if not 0.0 < s < 1.0:
        raise ValueError(f"s must lie in (0, 1), got {s}")
    return s


def check_exponent(p) -> float:
    p = float(p)
    if not p > 1.0:
        raise ValueError(f"p must exceed 1, got {p}")
    return p


def check_grid(X) -> Grid:
    if not isinstance(X, Grid):
        raise TypeError(
            f"expected a Grid (see build_grid_1d / build_grid_2d), got {type(X).__name__}"
        )
    return X


class FractionalEigen(BaseEstimator):
    """First (or sign-changing) eigenpair of the fractional p-Laplacian.

    ``fit`` takes a :class:`~fraceig.grid.Grid`; ``predict`` evaluates the
    piecewise-constant eigenfunction at arbitrary points (zero outside the
    domain).

    Parameters
    ----------
    s, p : float
        Order and exponent.
    multiplier : str
        Builtin kernel multiplier name.
    lam_lo, lam_hi : float or None
        Ellipticity bounds; default to the multiplier's range.
    mode : {'first', 'odd'}
    tol, max_iters, step0, backtrack, armijo, enforce_sign, seed, symmetrize
        Forwarded to :class:`~fraceig.solver.SolveOptions`.
    near_field_radius, tail_refine : int
        Forwarded to :class:`~fraceig.grid.AssemblyOptions`.

    Attributes
    ----------
    assembly_ : Assembly
    result_ : EigenResult
    eigenvalue_ : float
    eigenfunction_ : ndarray
    n_iter_ : int
    converged_ : bool
    """

    def __init__(
        self,
        s=0.5,
        p=2.0,
        multiplier="one",
        lam_lo=None,
        lam_hi=None,
        mode="first",
        tol=1e-10,
        max_iters=50_000,
        step0=1.0,
        backtrack=0.5,
        armijo=1e-4,
        enforce_sign=True,
        seed=0,
        symmetrize=None,
        near_field_radius=0,
        tail_refine=4,
    ):
        self.s = s
        self.p = p
        self.multiplier = multiplier
        self.lam_lo = lam_lo
        self.lam_hi = lam_hi
        self.mode = mode
        self.tol = tol
        self.max_iters = max_iters
        self.step0 = step0
        self.backtrack = backtrack
        self.armijo = armijo
        self.enforce_sign = enforce_sign
        self.seed = seed
        self.symmetrize = symmetrize
        self.near_field_radius = near_field_radius
        self.tail_refine = tail_refine

    def _solve_options(self):
        return SolveOptions(
            tol=self.tol,
            max_iters=self.max_iters,
            step0=self.step0,
            backtrack=self.backtrack,
            armijo=self.armijo,
            enforce_sign=self.enforce_sign,
            seed=self.seed,
            mode=self.mode,
            symmetrize=self.symmetrize,
        )

    def fit(self, X, y=None, init=None):
        grid = check_grid(X)
        kernel = make_kernel(
            check_order(self.s), check_exponent(self.p), grid.n,
            self.multiplier, self.lam_lo, self.lam_hi,
        )
        opts = AssemblyOptions(self.near_field_radius, self.tail_refine)
        self.assembly_ = assemble(grid, kernel, opts)
        so = self._solve_options()
        if self.mode == "odd":
            self.result_ = solve_odd(self.assembly_, so, init)
        else:
            self.result_ = minimize_rayleigh(self.assembly_, so, init)
        self.eigenvalue_ = self.result_.lam
        self.eigenfunction_ = self.result_.u
        self.n_iter_ = self.result_.iterations
        self.converged_ = self.result_.converged
        return self

    def predict(self, X):
        """Eigenfunction values at points ``X`` of shape (m,) or (m, n)."""
        check_is_fitted(self, "result_")
        grid = self.assembly_.grid
        idx = grid.cell_index(np.asarray(X, dtype=float))
        out = np.zeros(idx.shape)
        inside = idx >= 0
        out[inside] = self.eigenfunction_[idx[inside]]
        return out

    def score(self, X=None, y=None):
        """Negative weak-form residual of the fitted pair (higher is better)."""
        check_is_fitted(self, "result_")
        return -residual(self.assembly_, self.result_)
