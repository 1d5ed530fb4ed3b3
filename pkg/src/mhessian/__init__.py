"""First eigenvalue and eigenfunction of twisted complex m-Hessian operators.

Model domains are balls and boxes in C^n. Two carriers are supported: a
radial carrier (profile in rho = |z|^2, any n <= 8) and a uniform tensor
grid over 2n real axes (n <= 2).
"""

from mhessian.fields import (
    Domain,
    Grid,
    RadialGrid,
    GridPotential,
    RadialPotential,
    DensityMeasure,
    make_grid,
    make_radial_grid,
    make_density_measure,
    integrate,
)

__all__ = [
    "Domain",
    "Grid",
    "RadialGrid",
    "GridPotential",
    "RadialPotential",
    "DensityMeasure",
    "make_grid",
    "make_radial_grid",
    "make_density_measure",
    "integrate",
]

__version__ = "0.1.0"
