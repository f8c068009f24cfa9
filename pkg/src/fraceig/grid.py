"""Cell-centred lattices and the discrete nonlocal energy weights.

The domain is either an interval ``(a, b)`` or a union of lattice cells
selected by a mask inside a rectangular box.  Unknowns sit at cell
centres and are extended by zero outside the domain.  ``assemble``
produces pair weights ``w_ij`` (one entry per unordered pair) and tail
weights ``t_i`` encoding the interaction of each node with the exterior,
so that the energy of a grid function is

    2 * sum_{i<j} w_ij |u_i - u_j|^p + sum_i t_i |u_i|^p.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.spatial.distance import pdist, squareform

from .kernel import Kernel

__all__ = [
    "Grid",
    "Assembly",
    "AssemblyOptions",
    "GridError",
    "AssemblyError",
    "MASKS",
    "build_grid_1d",
    "build_grid_2d",
    "assemble",
    "assemble_tails",
    "cell_pair_integral_1d",
    "reflect",
    "scaled_grid",
]


class GridError(ValueError):
    """Invalid grid geometry."""


class AssemblyError(ArithmeticError):
    """Assembly produced non-finite weights."""


def _mask_all(x, y, box):
    return np.ones(np.shape(x), dtype=bool)


def _mask_disk(x, y, box):
    x0, x1, y0, y1 = box
    cx, cy = 0.5 * (x0 + x1), 0.5 * (y0 + y1)
    rho = 0.5 * min(x1 - x0, y1 - y0)
    return (x - cx) ** 2 + (y - cy) ** 2 < rho**2


def _mask_lshape(x, y, box):
    x0, x1, y0, y1 = box
    cx, cy = 0.5 * (x0 + x1), 0.5 * (y0 + y1)
    return ~((x > cx) & (y > cy))


# Masks are predicates on cell centres, expressed relative to the box.
MASKS: dict[str, Callable] = {
    "all": _mask_all,
    "disk": _mask_disk,
    "lshape": _mask_lshape,
}


@dataclass(frozen=True, eq=False)
class Grid:
    """Interior nodes of a uniform cell-centred lattice.

    Attributes
    ----------
    n : int
        Dimension.
    h : float
        Cell spacing.
    nodes : ndarray, shape (N, n)
        Cell centres inside the domain.
    descriptor : dict
        ``{"kind": "interval", "a", "b"}`` or
        ``{"kind": "box", "box", "mask", "mask_name"}`` where ``mask`` is the
        boolean cell-inclusion array of shape (nx, ny).
    symmetry_map : ndarray of int or None
        Involution on node indices realizing the central reflection.
    cells : ndarray of int or None
        Lattice indices (ix, iy) of each node (2D only).
    symmetries : tuple of ndarray
        Node permutations of every lattice isometry preserving the domain,
        identity included (the full symmetry group of the masked lattice).
    """

    n: int
    h: float
    nodes: np.ndarray
    descriptor: dict
    symmetry_map: np.ndarray | None = None
    cells: np.ndarray | None = field(default=None, repr=False)
    symmetries: tuple = field(default=(), repr=False)

    @property
    def size(self) -> int:
        return self.nodes.shape[0]

    @property
    def cell_volume(self) -> float:
        return self.h**self.n

    @property
    def measure(self) -> float:
        return self.size * self.cell_volume

    @property
    def coords(self) -> np.ndarray:
        """Node coordinates flattened to 1D when ``n == 1``."""
        return self.nodes[:, 0] if self.n == 1 else self.nodes

    def contains(self, points) -> np.ndarray:
        """Whether points lie in the closure of a domain cell."""
        pts = np.asarray(points, dtype=float)
        if self.n == 1:
            pts = pts.reshape(-1)
            a, b = self.descriptor["a"], self.descriptor["b"]
            return (pts >= a) & (pts <= b)
        return self.cell_index(pts) >= 0

    def cell_index(self, points) -> np.ndarray:
        """Node index owning each point, or -1 outside the domain."""
        pts = np.asarray(points, dtype=float)
        if self.n == 1:
            pts = pts.reshape(-1)
            a, b = self.descriptor["a"], self.descriptor["b"]
            idx = np.floor((pts - a) / self.h).astype(int)
            idx = np.where(pts == b, self.size - 1, idx)
            ok = (pts >= a) & (pts <= b)
            return np.where(ok, np.clip(idx, 0, self.size - 1), -1)
        pts = pts.reshape(-1, 2)
        x0, x1, y0, y1 = self.descriptor["box"]
        mask = self.descriptor["mask"]
        nx, ny = mask.shape
        ix = np.clip(np.floor((pts[:, 0] - x0) / self.h).astype(int), 0, nx - 1)
        iy = np.clip(np.floor((pts[:, 1] - y0) / self.h).astype(int), 0, ny - 1)
        inside = (
            (pts[:, 0] >= x0) & (pts[:, 0] <= x1) & (pts[:, 1] >= y0) & (pts[:, 1] <= y1)
        )
        lookup = np.full((nx, ny), -1, dtype=int)
        lookup[self.cells[:, 0], self.cells[:, 1]] = np.arange(self.size)
        return np.where(inside, lookup[ix, iy], -1)


def build_grid_1d(a: float, b: float, N: int) -> Grid:
    """Cell centres ``a + (i + 1/2) h`` of ``N`` equal cells of ``(a, b)``.

    A single cell is allowed; it yields the degenerate one-node grid.
    """
    a, b = float(a), float(b)
    if not a < b:
        raise GridError(f"need a < b, got a={a}, b={b}")
    if int(N) != N or N < 1:
        raise GridError(f"node count must be a positive integer, got {N}")
    N = int(N)
    h = (b - a) / N
    nodes = (a + (np.arange(N) + 0.5) * h)[:, None]
    sym = np.arange(N)[::-1].copy()
    group = (np.arange(N), sym)
    return Grid(1, h, nodes, {"kind": "interval", "a": a, "b": b}, sym, None, group)


def _cell_count(length, h):
    m = length / h
    k = int(round(m))
    if k < 1 or abs(m - k) > 1e-9 * max(1.0, m):
        raise GridError(f"spacing {h} does not divide side length {length}")
    return k


def build_grid_2d(box, h: float, mask="all") -> Grid:
    """Cells of a rectangular box whose centres satisfy ``mask``.

    Parameters
    ----------
    box : sequence of 4 floats
        ``(x0, x1, y0, y1)``.
    h : float
        Spacing; must divide both sides.
    mask : str or callable
        Builtin name from ``MASKS`` or a predicate ``mask(x, y, box)``
        returning a boolean array.
    """
    x0, x1, y0, y1 = (float(v) for v in box)
    if not (x1 > x0 and y1 > y0):
        raise GridError(f"box must have positive area, got {box}")
    h = float(h)
    if not h > 0:
        raise GridError(f"spacing must be positive, got {h}")
    nx = _cell_count(x1 - x0, h)
    ny = _cell_count(y1 - y0, h)
    if isinstance(mask, str):
        if mask not in MASKS:
            raise GridError(f"unknown mask {mask!r}; choose from {sorted(MASKS)}")
        mask_name, pred = mask, MASKS[mask]
    else:
        mask_name, pred = getattr(mask, "__name__", "custom"), mask
    cx = x0 + (np.arange(nx) + 0.5) * h
    cy = y0 + (np.arange(ny) + 0.5) * h
    X, Y = np.meshgrid(cx, cy, indexing="ij")
    inc = np.asarray(pred(X, Y, (x0, x1, y0, y1)), dtype=bool)
    if not inc.any():
        raise GridError("mask selects no cells")
    cells = np.argwhere(inc)
    nodes = np.column_stack([cx[cells[:, 0]], cy[cells[:, 1]]])
    sym = None
    if np.array_equal(inc, inc[::-1, ::-1]):
        lookup = np.full(inc.shape, -1, dtype=int)
        lookup[cells[:, 0], cells[:, 1]] = np.arange(len(cells))
        sym = lookup[nx - 1 - cells[:, 0], ny - 1 - cells[:, 1]]
    desc = {"kind": "box", "box": (x0, x1, y0, y1), "mask": inc, "mask_name": mask_name}
    return Grid(2, h, nodes, desc, sym, cells, _lattice_symmetries(inc, cells))


def _lattice_symmetries(inc, cells):
    # the eight isometries of the square lattice block that keep the mask
    nx, ny = inc.shape
    lookup = np.full(inc.shape, -1, dtype=int)
    lookup[cells[:, 0], cells[:, 1]] = np.arange(len(cells))
    maps = [lambda i, j: (i, j), lambda i, j: (nx - 1 - i, j),
            lambda i, j: (i, ny - 1 - j), lambda i, j: (nx - 1 - i, ny - 1 - j)]
    if nx == ny:
        maps += [lambda i, j: (j, i), lambda i, j: (ny - 1 - j, i),
                 lambda i, j: (j, nx - 1 - i), lambda i, j: (ny - 1 - j, nx - 1 - i)]
    I, J = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
    out = []
    for f in maps:
        fi, fj = f(I, J)
        if np.array_equal(inc[fi, fj], inc):
            fc = f(cells[:, 0], cells[:, 1])
            out.append(lookup[fc[0], fc[1]])
    return tuple(out)


def scaled_grid(grid: Grid, c: float) -> Grid:
    """Grid of ``c * Omega`` with spacing ``c * h`` and the same node set."""
    c = float(c)
    d = grid.descriptor
    if d["kind"] == "interval":
        desc = {"kind": "interval", "a": c * d["a"], "b": c * d["b"]}
    else:
        desc = dict(d, box=tuple(c * v for v in d["box"]))
    return Grid(
        grid.n, c * grid.h, c * grid.nodes, desc, grid.symmetry_map, grid.cells, grid.symmetries
    )


def reflect(grid: Grid, u) -> np.ndarray:
    """Values of ``u`` composed with the domain reflection."""
    if grid.symmetry_map is None:
        raise GridError("grid has no symmetry map")
    u = np.asarray(u)
    return u[grid.symmetry_map]


@dataclass
class AssemblyOptions:
    near_field_radius: int = 0
    tail_refine: int = 4


@dataclass(frozen=True, eq=False)
class Assembly:
    """Pair and tail weights of the discrete energy on a grid.

    ``w`` is in condensed form: entry ``k`` belongs to the pair
    ``(I[k], J[k])`` with ``I[k] < J[k]``, ordered as ``np.triu_indices``.
    """

    grid: Grid
    kernel: Kernel
    w: np.ndarray
    t: np.ndarray
    scheme: dict
    _dense: np.ndarray | None = field(default=None, repr=False)

    @property
    def p(self) -> float:
        return self.kernel.p

    @property
    def size(self) -> int:
        return self.grid.size

    @property
    def pairs(self) -> tuple[np.ndarray, np.ndarray]:
        return np.triu_indices(self.size, 1)

    @property
    def W(self) -> np.ndarray:
        """Dense symmetric weight matrix with zero diagonal."""
        if self._dense is None:
            object.__setattr__(self, "_dense", squareform(self.w, checks=False))
        return self._dense

    def with_tails(self, t) -> "Assembly":
        """Copy carrying replaced tail weights (fault injection, tests)."""
        return Assembly(self.grid, self.kernel, self.w, np.asarray(t, float), dict(self.scheme))


def cell_pair_integral_1d(a1, b1, a2, b2, beta):
    """Exact ``int_{a1}^{b1} int_{a2}^{b2} |x - y|^-beta dy dx`` for ``b1 <= a2``.

    Uses the second antiderivative ``F(r) = r^(2-beta) / ((1-beta)(2-beta))``,
    or ``-log r`` when ``beta == 2``.  Touching cells (``b1 == a2``) are
    finite only for ``beta < 2``.
    """
    if np.any(np.asarray(a2) < np.asarray(b1)):
        raise ValueError("cells must be ordered and non-overlapping")

    if beta == 2.0:

        def F(r):
            with np.errstate(divide="ignore"):
                return -np.log(r)

    else:
        c = 1.0 / ((1.0 - beta) * (2.0 - beta))

        def F(r):
            with np.errstate(divide="ignore"):
                return c * np.power(r, 2.0 - beta)

    return F(np.subtract(b2, a1)) - F(np.subtract(b2, b1)) - F(np.subtract(a2, a1)) + F(
        np.subtract(a2, b1)
    )


def assemble(grid: Grid, kernel: Kernel, opts: AssemblyOptions | None = None) -> Assembly:
    """Node-collocation weights ``w_ij = h^(2n) K(x_i, x_j)`` and tails.

    With ``opts.near_field_radius = r > 0`` (1D only) pairs with
    ``|i - j| <= r`` use the exact cell-pair integral of the pure kernel,
    scaled by the multiplier at the node pair.
    """
    opts = opts or AssemblyOptions()
    if kernel.n != grid.n:
        raise ValueError(f"kernel dimension {kernel.n} != grid dimension {grid.n}")
    N, h, n = grid.size, grid.h, grid.n
    I, J = np.triu_indices(N, 1)
    r = pdist(grid.nodes)
    with np.errstate(divide="ignore", over="ignore"):
        w = h ** (2 * n) * r ** (-kernel.exponent)
    if not kernel.is_pure:
        w = w * kernel.a(grid.nodes[I], grid.nodes[J])
    if opts.near_field_radius > 0:
        if n != 1:
            raise ValueError("near-field correction is available in 1D only")
        sel = (J - I) <= opts.near_field_radius
        xl = grid.descriptor["a"] + I[sel] * h
        xr = grid.descriptor["a"] + J[sel] * h
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            exact = cell_pair_integral_1d(xl, xl + h, xr, xr + h, 1.0 + kernel.sp)
        if not kernel.is_pure:
            exact = exact * kernel.a(grid.nodes[I[sel]], grid.nodes[J[sel]])
        w = w.copy()
        w[sel] = exact
    if not np.all(np.isfinite(w)):
        raise AssemblyError(
            "non-finite pair weight (touching cells diverge when s*p >= 1)"
        )
    t = assemble_tails(grid, kernel, opts)
    scheme = {
        "name": "collocation",
        "near_field_radius": int(opts.near_field_radius),
        "tail_refine": int(opts.tail_refine),
        "multiplier": kernel.name,
    }
    return Assembly(grid, kernel, w, t, scheme)


def assemble_tails(grid: Grid, kernel: Kernel, opts: AssemblyOptions | None = None) -> np.ndarray:
    """Tail weights ``t_i = 2 h^n int_{C Omega} K(x_i, y) dy``.

    In 1D the exterior integral is exact.  In 2D it splits into the
    analytic far field ``2 pi R^-sp / sp`` outside the smallest ball
    ``B_R(x_i)`` containing the domain and a midpoint rule on
    ``tail_refine``-fold subcells of ``B_R(x_i)`` minus the domain.
    Non-constant multipliers are evaluated exactly at quadrature points and
    frozen at the boundary point (1D) or at ``x_i + R e_1`` (2D far field).
    """
    opts = opts or AssemblyOptions()
    sp = kernel.sp
    h, n = grid.h, grid.n
    if n == 1:
        x = grid.nodes[:, 0]
        a, b = grid.descriptor["a"], grid.descriptor["b"]
        left = (x - a) ** (-sp) / sp
        right = (b - x) ** (-sp) / sp
        if not kernel.is_pure:
            left = left * kernel.a(grid.nodes, np.full_like(grid.nodes, a))
            right = right * kernel.a(grid.nodes, np.full_like(grid.nodes, b))
        T = left + right
    else:
        T = _tails_2d(grid, kernel, int(opts.tail_refine))
    t = 2.0 * h**n * T
    if not (np.all(np.isfinite(t)) and np.all(t > 0)):
        raise AssemblyError("tail weights must be finite and positive")
    return t


def _tails_2d(grid: Grid, kernel: Kernel, refine: int) -> np.ndarray:
    if refine < 1:
        raise ValueError("tail_refine must be >= 1")
    sp = kernel.sp
    h = grid.h
    x0, x1, y0, y1 = grid.descriptor["box"]
    mask = grid.descriptor["mask"]
    nodes = grid.nodes
    # corners of domain cells
    lo = np.column_stack([x0 + grid.cells[:, 0] * h, y0 + grid.cells[:, 1] * h])
    corners = np.concatenate([lo, lo + [h, 0], lo + [0, h], lo + [h, h]])
    R = np.sqrt(((nodes[:, None, :] - corners[None, :, :]) ** 2).sum(-1)).max(axis=1)
    Rmax = R.max()
    # exterior subcells on a lattice aligned with the box cells
    pad = int(math.ceil(Rmax / h)) + 1
    nx, ny = mask.shape
    hs = h / refine
    ix = np.arange(-pad * refine, (nx + pad) * refine)
    iy = np.arange(-pad * refine, (ny + pad) * refine)
    sx = x0 + (ix + 0.5) * hs
    sy = y0 + (iy + 0.5) * hs
    cx_parent = np.floor_divide(ix, refine)
    cy_parent = np.floor_divide(iy, refine)
    in_x = (cx_parent >= 0) & (cx_parent < nx)
    in_y = (cy_parent >= 0) & (cy_parent < ny)
    PX, PY = np.meshgrid(cx_parent, cy_parent, indexing="ij")
    inside = np.zeros(PX.shape, dtype=bool)
    ok = in_x[:, None] & in_y[None, :]
    inside[ok] = mask[PX[ok], PY[ok]]
    SX, SY = np.meshgrid(sx, sy, indexing="ij")
    ext = np.column_stack([SX[~inside], SY[~inside]])
    area = hs * hs
    T = np.empty(grid.size)
    for i in range(grid.size):
        d2 = ((ext - nodes[i]) ** 2).sum(axis=1)
        sel = d2 < R[i] ** 2
        vals = d2[sel] ** (-0.5 * kernel.exponent)
        if not kernel.is_pure:
            vals = vals * kernel.a(np.broadcast_to(nodes[i], (int(sel.sum()), 2)), ext[sel])
        near = area * vals.sum()
        far = 2.0 * np.pi * R[i] ** (-sp) / sp
        if not kernel.is_pure:
            far *= float(kernel.a(nodes[i], nodes[i] + np.array([R[i], 0.0])))
        T[i] = near + far
    return T
