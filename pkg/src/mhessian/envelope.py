"""m-subharmonic envelopes, relative extremal functions and capacities.

On a radial carrier a profile is discretely m-subharmonic exactly when it is
convex and nondecreasing in the variable t with dt = h * W^(-1/m) (W the
cell flux weights), so the envelope is the greatest convex nondecreasing
minorant of the obstacle in t; it is computed directly as a lower hull.

On grid carriers the envelope is the limit of projected Gauss-Seidel: each
node is lowered to min(obstacle, largest value keeping its Hessian in the
closed cone Gamma_m with the neighbours frozen).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from mhessian.fields import Grid, GridPotential, RadialGrid, RadialPotential
from mhessian.functionals import energy_Em
from mhessian.hessian import hessian_measure_density_unchecked, stencil
from mhessian.solvers.dirichlet import local_update


class EnvelopeError(RuntimeError):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


# ---------------------------------------------------------------------------
# radial


def flux_variable(carrier: RadialGrid, m: int) -> np.ndarray:
    # measured from the boundary: dt blows up at the origin when n > m, and a
    # cumulative sum started there would swamp the small steps near rho1
    dt = carrier.h * carrier.flux_weights ** (-1.0 / m)
    return -np.concatenate((np.cumsum(dt[::-1])[::-1], [0.0]))


def _lower_hull(t: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Greatest convex minorant of (t, y), evaluated at t."""
    hull = []
    for i in range(len(t)):
        while len(hull) >= 2:
            a, b = hull[-2], hull[-1]
            # drop b if it lies on or above the chord a -> i
            if (y[b] - y[a]) * (t[i] - t[a]) >= (y[i] - y[a]) * (t[b] - t[a]):
                hull.pop()
            else:
                break
        hull.append(i)
    return np.interp(t, t[hull], y[hull])


def _radial_envelope(h: RadialPotential, m: int) -> RadialPotential:
    t = flux_variable(h.carrier, m)
    conv = _lower_hull(t, h.values)
    k = int(np.argmin(conv))
    conv[:k] = conv[k]
    return RadialPotential(h.carrier, np.minimum(conv, h.values))


# ---------------------------------------------------------------------------
# grid


def _sor_factor(grid: Grid, m: int) -> float:
    if m != 1:
        return 1.0
    N = max(grid.shape)
    return 2.0 / (1.0 + math.sin(math.pi / (N - 1)))


def _grid_envelope(h: GridPotential, m: int, tol: float, max_sweeps: int, omega) -> GridPotential:
    grid = h.carrier
    st = stencil(grid)
    obstacle = h.values.ravel()[st.index]
    flat = np.zeros(grid.size)
    flat[st.index] = obstacle
    if omega is None:
        omega = _sor_factor(grid, m)
    change = np.inf
    for _ in range(max_sweeps):
        change = 0.0
        for color in st.colors:
            old = flat[st.index[color]]
            cand = local_update(st, flat, color, m, np.zeros(len(color)))
            relaxed = old + omega * (np.minimum(cand, 1e300) - old)
            new = np.minimum(obstacle[color], relaxed)
            change = max(change, float(np.max(np.abs(new - old))))
            flat[st.index[color]] = new
        if change < tol:
            return GridPotential(grid, flat.reshape(grid.shape))
    raise EnvelopeError(f"envelope iteration did not converge (last update {change:.3e})", change)


def envelope_Pm(h, m: int, tol: float = 1e-8, max_sweeps: int = 100000, omega: Optional[float] = None):
    """Largest discretely m-subharmonic potential below the obstacle ``h``."""
    if not 1 <= m <= h.n:
        raise ValueError(f"need 1 <= m <= n, got m={m}, n={h.n}")
    vals = h.values
    if not np.all(np.isfinite(vals)):
        raise ValueError("obstacle must be finite")
    if isinstance(h, RadialPotential):
        if vals[-1] > 0:
            raise ValueError("obstacle must be <= 0 on the boundary")
        return _radial_envelope(h, m)
    return _grid_envelope(h, m, tol, max_sweeps, omega)


# ---------------------------------------------------------------------------
# condensers and capacity


@dataclass
class Condenser:
    """Compact K (a node mask) inside the carrier's domain."""

    carrier: object
    mask: np.ndarray
    kind: str = "mask"
    r: float = math.nan

    def __post_init__(self):
        self.mask = np.asarray(self.mask, dtype=bool)
        if self.mask.shape != self.carrier.shape:
            raise ValueError("condenser mask does not match the carrier")
        if not self.mask.any():
            raise ValueError("condenser set K is empty")
        c = self.carrier
        if isinstance(c, RadialGrid):
            if np.any(self.mask[-3:]):
                raise ValueError("K touches the boundary collar")
        else:
            # two stencil widths of interior nodes around K
            safe = c.interior.copy()
            for _ in range(2):
                grown = safe.copy()
                for ax in range(safe.ndim):
                    for shift in (1, -1):
                        rolled = np.roll(safe, shift, axis=ax)
                        edge = [slice(None)] * safe.ndim
                        edge[ax] = 0 if shift == 1 else -1
                        rolled[tuple(edge)] = False
                        grown &= rolled
                safe = grown
            if np.any(self.mask & ~safe):
                raise ValueError("K touches the boundary collar")

    @classmethod
    def ball_in_ball(cls, carrier, r: float) -> "Condenser":
        R = carrier.domain.radius
        if not 0 < r < R:
            raise ValueError(f"need 0 < r < R, got r={r}, R={R}")
        rho = carrier.rho
        return cls(carrier, rho <= r * r * (1 + 1e-12), "ball_in_ball", r)

    def obstacle(self):
        vals = np.where(self.mask, -1.0, 0.0)
        if isinstance(self.carrier, RadialGrid):
            return RadialPotential(self.carrier, vals)
        return GridPotential(self.carrier, vals)


def extremal_function(cond: Condenser, m: int, tol: float = 1e-8, max_sweeps: int = 100000):
    """h_K = P_m(-1_K)."""
    return envelope_Pm(cond.obstacle(), m, tol=tol, max_sweeps=max_sweeps)


def radial_extremal_closed_form(rho, r: float, R: float, n: int, m: int) -> np.ndarray:
    """Continuous h_K for K = closed ball of radius r in the ball of radius R."""
    rho = np.asarray(rho, dtype=float)
    r0, r1 = r * r, R * R
    with np.errstate(divide="ignore"):
        if m == n:
            prof = -np.log(rho / r1) / math.log(r0 / r1)
        else:
            g = 1.0 - n / m
            prof = -(rho**g - r1**g) / (r0**g - r1**g)
    return np.maximum(-1.0, prof)


def radial_capacity_closed_form(r: float, R: float, n: int, m: int) -> float:
    """Continuous c_m(B_r, B_R) = (4 pi)^n rho^n (v')^m, constant off K."""
    r0, r1 = r * r, R * R
    if m == n:
        return (4.0 * math.pi / math.log(r1 / r0)) ** n
    g = 1.0 - n / m
    return (4.0 * math.pi) ** n * (-g / (r0**g - r1**g)) ** m


@dataclass
class CapacityResult:
    mass_version: float
    energy_version: float
    ratio: float

    header = "mass_version,energy_version,ratio"

    def csv_row(self) -> str:
        return ",".join(f"{x:.17g}" for x in (self.mass_version, self.energy_version, self.ratio))


def capacity_cm(cond: Condenser, m: int, tol: float = 1e-8, max_sweeps: int = 100000) -> CapacityResult:
    hK = extremal_function(cond, m, tol=tol, max_sweeps=max_sweeps)
    dens = hessian_measure_density_unchecked(hK, m)
    mass = float(np.sum(dens * cond.carrier.weights))
    energy = energy_Em(hK, m)
    return CapacityResult(mass, energy, energy / mass if mass > 0 else math.nan)
