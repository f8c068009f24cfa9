"""First eigenpairs of the fractional p-Laplacian on bounded grids."""

__version__ = "0.1.0"

from .energy import energy, form, lp_norm_p, phi_p, rayleigh, rayleigh_gradient
from .estimator import FractionalEigen
from .grid import (
    Assembly,
    AssemblyError,
    AssemblyOptions,
    Grid,
    GridError,
    assemble,
    build_grid_1d,
    build_grid_2d,
    scaled_grid,
)
from .kernel import Kernel, KernelError, SingularKernelError, make_fractional_kernel, make_kernel
from .solver import (
    EigenResult,
    SolveOptions,
    dense_oracle_p2,
    minimize_rayleigh,
    normalize,
    residual,
    solve_odd,
)

__all__ = [
    "__version__",
    "Assembly",
    "AssemblyError",
    "AssemblyOptions",
    "EigenResult",
    "FractionalEigen",
    "Grid",
    "GridError",
    "Kernel",
    "KernelError",
    "SingularKernelError",
    "SolveOptions",
    "assemble",
    "build_grid_1d",
    "build_grid_2d",
    "dense_oracle_p2",
    "energy",
    "form",
    "lp_norm_p",
    "make_fractional_kernel",
    "make_kernel",
    "minimize_rayleigh",
    "normalize",
    "phi_p",
    "rayleigh",
    "rayleigh_gradient",
    "residual",
    "scaled_grid",
    "solve_odd",
]
