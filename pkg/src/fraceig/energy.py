"""Discrete nonlocal energy, weak form, operator and Rayleigh quotient.

Grid functions are plain float arrays indexed like ``Assembly.grid.nodes``
and are implicitly zero outside the domain.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .grid import Assembly

__all__ = [
    "EnergyValue",
    "phi_p",
    "energy",
    "form",
    "apply_operator",
    "lp_norm_p",
    "rayleigh",
    "rayleigh_gradient",
    "check_grid_function",
]


class EnergyValue(NamedTuple):
    k_interior: float
    k_tail: float
    total: float


def phi_p(tau, p):
    """Odd power map ``|tau|^(p-2) tau`` with ``phi_p(0) = 0``."""
    tau = np.asarray(tau, dtype=float)
    return np.sign(tau) * np.abs(tau) ** (p - 1.0)


def check_grid_function(A: Assembly, u, name="u") -> np.ndarray:
    """Validate ``u`` as a finite vector on ``A``'s grid."""
    u = np.asarray(u, dtype=float)
    if u.ndim != 1 or u.shape[0] != A.size:
        raise ValueError(
            f"{name} has shape {u.shape}, expected ({A.size},) for this grid"
        )
    if not np.all(np.isfinite(u)):
        raise ValueError(f"{name} contains non-finite values")
    return u


def energy(A: Assembly, u) -> EnergyValue:
    """Energy ``2 sum_{i<j} w_ij |u_i-u_j|^p + sum_i t_i |u_i|^p``."""
    u = check_grid_function(A, u)
    I, J = A.pairs
    p = A.p
    k_int = 2.0 * np.sum(A.w * np.abs(u[I] - u[J]) ** p)
    k_tail = np.sum(A.t * np.abs(u) ** p)
    return EnergyValue(float(k_int), float(k_tail), float(k_int + k_tail))


def form(A: Assembly, u, v) -> float:
    """Weak form ``2 sum_{i<j} w_ij phi_p(u_i-u_j)(v_i-v_j) + sum_i t_i phi_p(u_i) v_i``."""
    u = check_grid_function(A, u)
    v = check_grid_function(A, v, "v")
    I, J = A.pairs
    p = A.p
    inner = 2.0 * np.sum(A.w * phi_p(u[I] - u[J], p) * (v[I] - v[J]))
    return float(inner + np.sum(A.t * phi_p(u, p) * v))


def _pair_flux(A: Assembly, u) -> np.ndarray:
    # sum_j w_ij phi_p(u_i - u_j), fixed row-wise reduction order
    D = u[:, None] - u[None, :]
    return np.sum(A.W * phi_p(D, A.p), axis=1)


def apply_operator(A: Assembly, u) -> np.ndarray:
    """Discrete operator ``(2 sum_j w_ij phi_p(u_j-u_i) - t_i phi_p(u_i)) / h^n``.

    Satisfies ``-h^n <L u, eta> = form(A, u, eta)`` for every ``eta``.
    """
    u = check_grid_function(A, u)
    hn = A.grid.cell_volume
    return (-2.0 * _pair_flux(A, u) - A.t * phi_p(u, A.p)) / hn


def lp_norm_p(u, p: float, h: float = 1.0, n: int = 1) -> float:
    """p-th power of the discrete L^p norm, ``h^n sum |u_i|^p``."""
    u = np.asarray(u, dtype=float)
    return float(h**n * np.sum(np.abs(u) ** p))


def _norm_p(A: Assembly, u) -> float:
    return lp_norm_p(u, A.p, A.grid.h, A.grid.n)


def rayleigh(A: Assembly, u) -> float:
    """Rayleigh quotient ``energy(u) / ||u||_p^p``."""
    u = check_grid_function(A, u)
    den = _norm_p(A, u)
    if den == 0.0:
        raise ZeroDivisionError("Rayleigh quotient of the zero function")
    return energy(A, u).total / den


def rayleigh_gradient(A: Assembly, u, R: float | None = None) -> np.ndarray:
    """Gradient of the Rayleigh quotient with respect to the node values.

    ``R`` may be passed when already known to avoid recomputing it.
    """
    u = check_grid_function(A, u)
    den = _norm_p(A, u)
    if den == 0.0:
        raise ZeroDivisionError("Rayleigh gradient of the zero function")
    if R is None:
        R = energy(A, u).total / den
    p = A.p
    pu = phi_p(u, p)
    hn = A.grid.cell_volume
    return (p / den) * (2.0 * _pair_flux(A, u) + A.t * pu - R * hn * pu)
