"""Domains, carriers, potentials, measures and quadrature.

All densities are taken relative to the reference volume beta^n, where
beta = dd^c |z|^2.  In real coordinates beta^n = 4^n n! dV (Lebesgue), so
the beta^n-mass of the ball of radius R in C^n is (4 pi)^n R^(2n).

Two carriers exist:

* ``RadialGrid``: uniform nodes in rho = |z|^2 on [0, R^2].  Quadrature uses
  dual cells [rho_{i-1/2}, rho_{i+1/2}], whose beta^n-mass is known in closed
  form, so integrating the constant 1 reproduces the ball mass exactly.
* ``Grid``: uniform tensor grid over the 2n real axes (x_1, y_1, ..., x_n, y_n)
  of a box or of the bounding box of a ball.  Quadrature weights are the
  beta^n-mass of the part of each node's cell lying inside the domain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

MAX_GRID_N = 2
MAX_RADIAL_N = 8

# Interior nodes must sit at least this many cells inside the boundary.
COLLAR_FRACTION = 0.5


def beta_factor(n: int) -> float:
    """Ratio beta^n / dV for C^n."""
    return 4.0**n * math.factorial(n)


def ball_beta_mass(n: int, radius: float) -> float:
    return (4.0 * math.pi) ** n * radius ** (2 * n)


@dataclass(frozen=True)
class Domain:
    """A ball of radius ``radius`` centred at 0, or a box ``prod [-e_a, e_a]``.

    ``extents`` lists the 2n real half-widths in the order x_1, y_1, ..., x_n, y_n.
    """

    kind: str
    n: int
    radius: float = 1.0
    extents: Optional[tuple] = None

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("complex dimension must be >= 1")
        if self.kind == "ball":
            if not self.radius > 0:
                raise ValueError("ball radius must be positive")
        elif self.kind == "box":
            if self.extents is None or len(self.extents) != 2 * self.n:
                raise ValueError("box needs 2n real half-widths")
            if min(self.extents) <= 0:
                raise ValueError("box extents must be positive")
            object.__setattr__(self, "extents", tuple(float(e) for e in self.extents))
        else:
            raise ValueError(f"unknown domain kind {self.kind!r}")

    @classmethod
    def ball(cls, n: int, radius: float = 1.0) -> "Domain":
        return cls("ball", n, radius=float(radius))

    @classmethod
    def box(cls, n: int, extents: Union[float, Sequence[float]]) -> "Domain":
        if np.isscalar(extents):
            extents = (float(extents),) * (2 * n)
        return cls("box", n, extents=tuple(extents))

    @property
    def radial(self) -> bool:
        return self.kind == "ball"

    def half_widths(self) -> tuple:
        if self.kind == "ball":
            return (self.radius,) * (2 * self.n)
        return self.extents

    def beta_mass(self) -> float:
        if self.kind == "ball":
            return ball_beta_mass(self.n, self.radius)
        return beta_factor(self.n) * float(np.prod([2 * e for e in self.extents]))


# ---------------------------------------------------------------------------
# radial carrier


class RadialGrid:
    """Uniform nodes rho_i = i*h on [0, rho1], rho1 = R^2."""

    kind = "radial"

    def __init__(self, n: int, rho1: float, points: int):
        if not 1 <= n <= MAX_RADIAL_N:
            raise ValueError(f"radial carrier needs 1 <= n <= {MAX_RADIAL_N}")
        if points < 5:
            raise ValueError("radial carrier needs at least 5 nodes")
        if not rho1 > 0:
            raise ValueError("outer radius must be positive")
        self.n = int(n)
        self.rho1 = float(rho1)
        self.points = int(points)
        self.rho = np.linspace(0.0, self.rho1, self.points)
        self.h = self.rho1 / (self.points - 1)
        self.shape = (self.points,)
        # cell midpoints and the cell flux weights W_i = h * mid_i^n
        self.mid = 0.5 * (self.rho[1:] + self.rho[:-1])
        self.flux_weights = self.h * self.mid**n
        edges = np.concatenate(([0.0], self.mid, [self.rho1]))
        self.weights = (4.0 * math.pi) ** n * np.diff(edges**n)
        self.interior = np.ones(self.points, dtype=bool)
        self.interior[-1] = False

    @property
    def radius(self) -> float:
        return math.sqrt(self.rho1)

    @property
    def domain(self) -> Domain:
        return Domain.ball(self.n, self.radius)

    def same_as(self, other) -> bool:
        return (
            isinstance(other, RadialGrid)
            and other.n == self.n
            and other.points == self.points
            and other.rho1 == self.rho1
        )

    def coordinates(self) -> np.ndarray:
        return self.rho

    def __repr__(self):
        return f"RadialGrid(n={self.n}, rho1={self.rho1!r}, points={self.points})"


def make_radial_grid(domain: Union[Domain, int], points: int, radius: float = 1.0) -> RadialGrid:
    if isinstance(domain, Domain):
        if not domain.radial:
            raise ValueError("box domains do not admit a radial representation")
        return RadialGrid(domain.n, domain.radius**2, points)
    return RadialGrid(int(domain), float(radius) ** 2, points)


# ---------------------------------------------------------------------------
# tensor grid carrier


def _cell_fraction_ball(points: np.ndarray, h: np.ndarray, radius: float, sub: int) -> np.ndarray:
    """Fraction of each axis-aligned cell centred at ``points`` inside the ball."""
    dim = points.shape[1]
    offs = (np.arange(sub) + 0.5) / sub - 0.5
    mesh = np.stack(np.meshgrid(*([offs] * dim), indexing="ij"), axis=-1).reshape(-1, dim) * h
    out = np.empty(len(points))
    chunk = max(1, 2_000_000 // len(mesh))
    for start in range(0, len(points), chunk):
        p = points[start : start + chunk, None, :] + mesh[None, :, :]
        out[start : start + chunk] = np.mean(np.sum(p * p, axis=-1) < radius * radius, axis=1)
    return out


class Grid:
    """Uniform tensor grid over the 2n real axes of a domain's bounding box.

    Attributes of note:
      ``dist``      signed distance to the boundary (negative inside)
      ``level``     defining function (|z|^2 - R^2 for balls, ``dist`` for boxes)
      ``interior``  nodes carrying unknowns; every node within half a cell of
                    the boundary is excluded (the collar)
      ``weights``   beta^n-mass of each node's cell intersected with the domain
    """

    kind = "grid"

    def __init__(self, domain: Domain, points_per_axis: int):
        n = domain.n
        if n > MAX_GRID_N:
            raise ValueError(f"grid carrier limited to n <= {MAX_GRID_N}")
        if points_per_axis < 5 or points_per_axis % 2 == 0:
            raise ValueError("points_per_axis must be odd and >= 5")
        self.domain = domain
        self.n = n
        self.points = int(points_per_axis)
        self.dim = 2 * n
        self.shape = (self.points,) * self.dim
        widths = domain.half_widths()
        self.axes = [np.linspace(-w, w, self.points) for w in widths]
        self.h = np.array([2.0 * w / (self.points - 1) for w in widths])
        mesh = np.meshgrid(*self.axes, indexing="ij")
        self.coords = np.stack(mesh)  # (2n, *shape)

        if domain.kind == "ball":
            r = np.sqrt(np.sum(self.coords**2, axis=0))
            self.dist = r - domain.radius
            self.level = r * r - domain.radius**2
        else:
            w = np.array(widths).reshape((-1,) + (1,) * self.dim)
            self.dist = np.max(np.abs(self.coords) - w, axis=0)
            self.level = self.dist
        self.interior = self.dist < -COLLAR_FRACTION * float(self.h.min())

        cell = float(np.prod(self.h))
        if domain.kind == "ball":
            frac = (self.dist < 0).astype(float)
            half_diag = 0.5 * float(np.sqrt(np.sum(self.h**2)))
            edge = np.abs(self.dist) < half_diag
            pts = self.coords.reshape(self.dim, -1).T[edge.ravel()]
            frac[edge] = _cell_fraction_ball(pts, self.h, domain.radius, 8 if n == 1 else 4)
        else:
            frac = np.ones(self.shape)
            for a, ax in enumerate(self.axes):
                lo = np.clip(ax - self.h[a] / 2, -widths[a], widths[a])
                hi = np.clip(ax + self.h[a] / 2, -widths[a], widths[a])
                shp = [1] * self.dim
                shp[a] = -1
                frac = frac * ((hi - lo) / self.h[a]).reshape(shp)
        self.weights = beta_factor(n) * cell * frac
        self._stencil = None

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def z(self) -> np.ndarray:
        """Complex coordinates, shape (n, *shape)."""
        return self.coords[0::2] + 1j * self.coords[1::2]

    @property
    def rho(self) -> np.ndarray:
        return np.sum(self.coords**2, axis=0)

    def coordinates(self) -> np.ndarray:
        return self.z

    def same_as(self, other) -> bool:
        return isinstance(other, Grid) and other.domain == self.domain and other.points == self.points

    def __repr__(self):
        return f"Grid({self.domain!r}, points_per_axis={self.points})"


def make_grid(domain: Domain, points_per_axis: int) -> Grid:
    return Grid(domain, points_per_axis)


Carrier = Union[Grid, RadialGrid]


# ---------------------------------------------------------------------------
# potentials


@dataclass
class RadialPotential:
    """Profile v(rho) sampled at the nodes of a radial carrier."""

    carrier: RadialGrid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.carrier.shape:
            raise ValueError("values do not match the carrier")

    @classmethod
    def from_function(cls, carrier: RadialGrid, fn: Callable) -> "RadialPotential":
        return cls(carrier, np.broadcast_to(fn(carrier.rho), carrier.shape).astype(float))

    @property
    def n(self) -> int:
        return self.carrier.n

    def slopes(self) -> np.ndarray:
        """Cell slopes (v_{i+1} - v_i)/h; second order at cell midpoints."""
        return np.diff(self.values) / self.carrier.h

    def scaled(self, c: float) -> "RadialPotential":
        return RadialPotential(self.carrier, c * self.values)

    def with_values(self, values) -> "RadialPotential":
        return RadialPotential(self.carrier, values)


@dataclass
class GridPotential:
    """Samples of a real function on a tensor grid.

    With ``dirichlet=True`` (the default) the function is treated as having
    zero boundary trace: only interior nodes carry data, all other nodes hold
    0, and difference stencils reaching past the interior use values
    extrapolated linearly in the defining function of the domain.  With
    ``dirichlet=False`` the stored values at every node are used as they are
    (for sampling arbitrary test functions).
    """

    carrier: Grid
    values: np.ndarray
    dirichlet: bool = True

    def __post_init__(self):
        self.values = np.array(self.values, dtype=float)
        if self.values.shape != self.carrier.shape:
            raise ValueError("values do not match the carrier")
        if self.dirichlet:
            self.values[~self.carrier.interior] = 0.0

    @classmethod
    def from_function(cls, carrier: Grid, fn: Callable, dirichlet: bool = True) -> "GridPotential":
        vals = np.broadcast_to(fn(carrier.z), carrier.shape)
        return cls(carrier, np.array(vals, dtype=float), dirichlet=dirichlet)

    @property
    def n(self) -> int:
        return self.carrier.n

    def scaled(self, c: float) -> "GridPotential":
        return GridPotential(self.carrier, c * self.values, self.dirichlet)

    def with_values(self, values) -> "GridPotential":
        return GridPotential(self.carrier, values, self.dirichlet)


Potential = Union[GridPotential, RadialPotential]


def lift_radial(v: RadialPotential, grid: Grid) -> GridPotential:
    """Evaluate a radial profile on a grid by linear interpolation in rho."""
    if grid.domain != v.carrier.domain:
        raise ValueError("grid and radial carrier describe different balls")
    vals = np.interp(grid.rho, v.carrier.rho, v.values, right=0.0)
    return GridPotential(grid, vals)


# ---------------------------------------------------------------------------
# measures


@dataclass
class DensityMeasure:
    """mu = density * beta^n on a carrier, with the carrier's quadrature weights."""

    carrier: Carrier
    density: np.ndarray
    total_mass: float = field(init=False)

    def __post_init__(self):
        self.density = np.asarray(self.density, dtype=float)
        if self.density.shape != self.carrier.shape:
            raise ValueError("density does not match the carrier")
        inside = self.carrier.weights > 0
        if np.any(self.density[inside] < 0):
            raise ValueError("density must be nonnegative")
        self.total_mass = float(np.sum(self.density * self.carrier.weights))
        if not self.total_mass > 0:
            raise ValueError("measure has zero mass")
        if not np.isfinite(self.total_mass):
            raise ValueError("measure has infinite mass")

    @property
    def weights(self) -> np.ndarray:
        return self.carrier.weights

    def restricted(self, mask: np.ndarray) -> "DensityMeasure":
        return DensityMeasure(self.carrier, np.where(mask, self.density, 0.0))


def make_density_measure(carrier: Carrier, density_fn, reference: str = "beta") -> DensityMeasure:
    """Sample ``density_fn`` on the carrier.

    ``density_fn`` receives rho (radial carrier) or the complex coordinates of
    shape (n, *shape) (grid carrier); a plain number is accepted as a constant.
    ``reference="lebesgue"`` means the density is given relative to dV and
    is converted to beta^n.
    """
    if callable(density_fn):
        g = density_fn(carrier.coordinates())
    else:
        g = density_fn
    g = np.array(np.broadcast_to(g, carrier.shape), dtype=float)
    if reference == "lebesgue":
        g = g / beta_factor(carrier.n)
    elif reference != "beta":
        raise ValueError(f"unknown reference volume {reference!r}")
    g[carrier.weights == 0] = 0.0
    return DensityMeasure(carrier, g)


def beta_measure(carrier: Carrier) -> DensityMeasure:
    """The reference volume itself, restricted to the domain."""
    return make_density_measure(carrier, 1.0)


def _carrier_of(obj):
    return getattr(obj, "carrier", None)


def integrate(field_values, measure: DensityMeasure) -> float:
    """Quadrature of a scalar field against ``measure``."""
    other = _carrier_of(field_values)
    if other is not None:
        if not other.same_as(measure.carrier):
            raise ValueError("carrier mismatch")
        field_values = field_values.values
    f = np.asarray(field_values, dtype=float)
    if f.ndim and f.shape != measure.carrier.shape:
        raise ValueError("carrier mismatch")
    return float(np.sum(f * measure.density * measure.carrier.weights))
