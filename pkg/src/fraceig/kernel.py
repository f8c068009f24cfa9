"""Singular interaction kernels K(x, y) = a(x, y) |x - y|^-(n + s p).

A kernel is the fractional kernel of order ``s`` and exponent ``p`` in
dimension ``n``, optionally modulated by a symmetric multiplier ``a`` that
is bounded between ``lam_lo`` and ``lam_hi``.  The multiplier defaults to
``a = 1`` (the pure fractional p-Laplacian).

Reported eigenvalues carry the normalization constant c(n, p, s) = 1.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

__all__ = [
    "Kernel",
    "KernelError",
    "SingularKernelError",
    "EllipticityReport",
    "MULTIPLIERS",
    "make_fractional_kernel",
    "make_kernel",
    "eval_kernel",
    "kernel_values",
    "check_ellipticity",
]


class KernelError(ValueError):
    """Invalid kernel parameters."""


class SingularKernelError(KernelError):
    """Kernel evaluated on the diagonal x = y."""


def _one(x, y):
    return np.ones(np.broadcast_shapes(x.shape[:-1], y.shape[:-1]))


def _sin_bump(x, y):
    return 1.0 + 0.5 * np.sin(x[..., 0] + y[..., 0])


# name -> (function, lam_lo, lam_hi)
MULTIPLIERS: dict[str, tuple[Callable, float, float]] = {
    "one": (_one, 1.0, 1.0),
    "sin_bump": (_sin_bump, 0.5, 1.5),
}


@dataclass(frozen=True)
class Kernel:
    """Fractional kernel with a bounded symmetric multiplier.

    Parameters
    ----------
    s : float
        Fractional order in (0, 1).
    p : float
        Integrability exponent, p > 1.
    n : int
        Spatial dimension, 1 or 2.
    multiplier : callable or None
        ``a(x, y)`` acting on arrays of points with trailing axis ``n``.
        ``None`` means ``a = 1``.
    lam_lo, lam_hi : float
        Ellipticity bounds ``lam_lo <= a <= lam_hi``.
    name : str
        Identifier of the multiplier, used in assembly tags and configs.
    """

    s: float
    p: float
    n: int
    multiplier: Callable | None = field(default=None, compare=False)
    lam_lo: float = 1.0
    lam_hi: float = 1.0
    name: str = "one"

    def __post_init__(self):
        _validate(self.s, self.p, self.n)
        if not (0.0 < self.lam_lo <= self.lam_hi):
            raise KernelError(
                f"need 0 < lam_lo <= lam_hi, got {self.lam_lo}, {self.lam_hi}"
            )

    @property
    def exponent(self) -> float:
        """Singularity exponent n + s p."""
        return self.n + self.s * self.p

    @property
    def sp(self) -> float:
        return self.s * self.p

    @property
    def is_pure(self) -> bool:
        return self.multiplier is None

    def a(self, x, y) -> np.ndarray:
        """Multiplier values for point arrays ``x``, ``y`` of shape (..., n)."""
        x = _as_points(x, self.n)
        y = _as_points(y, self.n)
        if self.multiplier is None:
            return _one(x, y)
        return np.asarray(self.multiplier(x, y), dtype=float)


def _validate(s, p, n):
    if not (0.0 < s < 1.0):
        raise KernelError(f"order s must lie in (0, 1), got {s}")
    if not p > 1.0:
        raise KernelError(f"exponent p must exceed 1, got {p}")
    if n not in (1, 2):
        raise KernelError(f"dimension n must be 1 or 2, got {n}")


def _as_points(x, n):
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        x = x.reshape(1)
    if x.shape[-1] != n:
        if n == 1:
            x = x[..., None]
        else:
            raise KernelError(f"points must have trailing dimension {n}")
    return x


def make_fractional_kernel(s: float, p: float, n: int) -> Kernel:
    """Pure kernel ``|x - y|^-(n + s p)`` with ``a = 1``."""
    return Kernel(s=float(s), p=float(p), n=int(n))


def make_kernel(s, p, n, multiplier="one", lam_lo=None, lam_hi=None) -> Kernel:
    """Build a kernel from a builtin multiplier name.

    Bounds default to the builtin's natural range.
    """
    if multiplier not in MULTIPLIERS:
        raise KernelError(
            f"unknown multiplier {multiplier!r}; choose from {sorted(MULTIPLIERS)}"
        )
    fn, lo, hi = MULTIPLIERS[multiplier]
    lo = lo if lam_lo is None else float(lam_lo)
    hi = hi if lam_hi is None else float(lam_hi)
    if multiplier == "one":
        return Kernel(float(s), float(p), int(n), None, lo, hi, "one")
    return Kernel(float(s), float(p), int(n), fn, lo, hi, multiplier)


def kernel_values(k: Kernel, x, y) -> np.ndarray:
    """Vectorized ``K(x, y)`` over broadcastable point arrays."""
    x = _as_points(x, k.n)
    y = _as_points(y, k.n)
    r = np.sqrt(np.sum((x - y) ** 2, axis=-1))
    if np.any(r == 0.0):
        raise SingularKernelError("kernel is singular on the diagonal x = y")
    return k.a(x, y) * r ** (-k.exponent)


def eval_kernel(k: Kernel, x, y) -> float:
    """Pointwise kernel value for a single pair of distinct points."""
    return float(kernel_values(k, x, y).reshape(-1)[0])


class EllipticityReport(NamedTuple):
    ok: bool
    worst_ratio: float


def check_ellipticity(k: Kernel, sample_pairs) -> EllipticityReport:
    """Check symmetry and the two-sided bound of the multiplier on samples.

    ``worst_ratio`` is the sampled value of ``a`` lying furthest outside
    (or closest to the edge of) ``[lam_lo, lam_hi]`` in the relative sense.
    """
    pairs = list(sample_pairs)
    if not pairs:
        return EllipticityReport(True, 1.0)
    x = np.stack([_as_points(px, k.n).reshape(k.n) for px, _ in pairs])
    y = np.stack([_as_points(py, k.n).reshape(k.n) for _, py in pairs])
    if np.any(np.all(x == y, axis=-1)):
        raise SingularKernelError("sample pairs must have x != y")
    axy = k.a(x, y)
    ayx = k.a(y, x)
    ok = bool(
        np.all(axy == ayx) and np.all(axy >= k.lam_lo) and np.all(axy <= k.lam_hi)
    )
    badness = np.maximum(axy / k.lam_hi, k.lam_lo / axy)
    return EllipticityReport(ok, float(axy[np.argmax(badness)]))
