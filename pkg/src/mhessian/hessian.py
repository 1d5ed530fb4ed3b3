"""Complex Hessians, elementary symmetric polynomials and Hessian measures.

Grid potentials use second-order central differences:

    H_jk = 1/4 [(D_{x_j x_k} + D_{y_j y_k}) u + i (D_{x_j y_k} - D_{y_j x_k}) u]

with the 4-point cross stencil for mixed derivatives.  For zero-trace
potentials a stencil point outside the interior takes the value
``u_c * level(e) / level(c)`` (linear extrapolation in the domain's defining
function), which is exact for u = |z|^2 - R^2 on balls.

Radial profiles v(rho) have Hessian eigenvalues v' (multiplicity n-1) and
v' + rho v''.  The measure density is evaluated in flux form,

    sigma_m = C(n-1, m-1) / (m rho^(n-1)) d/drho (rho^n v'^m),

discretised on dual cells so that summation by parts is exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from mhessian.fields import Grid, GridPotential, RadialGrid, RadialPotential


class ConeError(ValueError):
    """A potential fails the m-subharmonicity test."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


def measure_factor(m: int, n: int) -> float:
    """m!(n-m)!/n!, so that (dd^c u)^m ^ beta^(n-m) = factor * sigma_m * beta^n."""
    return 1.0 / math.comb(n, m)


def elementary_symmetric(eigs: np.ndarray, k: int) -> np.ndarray:
    """e_k of the last axis of ``eigs``."""
    eigs = np.asarray(eigs, dtype=float)
    n = eigs.shape[-1]
    if k < 0 or k > n:
        raise ValueError(f"k={k} outside 0..{n}")
    e = [np.ones(eigs.shape[:-1])] + [np.zeros(eigs.shape[:-1]) for _ in range(k)]
    for i in range(n):
        lam = eigs[..., i]
        for j in range(min(i + 1, k), 0, -1):
            e[j] = e[j] + lam * e[j - 1]
    return e[k]


# ---------------------------------------------------------------------------
# grid stencils


class Stencil:
    """Neighbour tables for the interior nodes of a grid.

    For each offset the table stores the flat neighbour index and the ghost
    ratio ``level(e)/level(c)`` (0 when the neighbour is an interior node).
    """

    def __init__(self, grid: Grid):
        self.grid = grid
        dim = grid.dim
        shape = grid.shape
        self.index = np.flatnonzero(grid.interior.ravel())
        multi = np.array(np.unravel_index(self.index, shape))
        level = grid.level.ravel()
        interior = grid.interior.ravel()
        lc = level[self.index]

        def table(offset):
            nb = np.ravel_multi_index(tuple(multi + np.array(offset)[:, None]), shape)
            ratio = np.where(interior[nb], 0.0, level[nb] / lc)
            return nb, ratio

        self.axis = []
        for a in range(dim):
            e = np.zeros(dim, dtype=int)
            e[a] = 1
            self.axis.append((table(e), table(-e)))
        self.pairs = {}
        for a, b in combinations(range(dim), 2):
            if a // 2 == b // 2:
                continue
            tabs = []
            for sa, sb in ((1, 1), (1, -1), (-1, 1), (-1, -1)):
                e = np.zeros(dim, dtype=int)
                e[a], e[b] = sa, sb
                tabs.append(table(e))
            self.pairs[(a, b)] = tabs
        # position of every interior node inside ``index``
        self.slot = np.full(grid.size, -1)
        self.slot[self.index] = np.arange(len(self.index))
        # colouring by per-axis parity: no stencil joins two nodes of one colour
        parity = multi % 2
        code = np.sum(parity * (2 ** np.arange(dim))[:, None], axis=0)
        self.colors = [np.flatnonzero(code == c) for c in range(2**dim) if np.any(code == c)]
        self.center_coeff = self._center_coefficients()

    def second_differences(self, flat, uc, sel=None, ghost=True):
        """Return ({a: D_aa}, {(a,b): D_ab}) at the selected interior nodes."""
        h = self.grid.h
        idx = slice(None) if sel is None else sel

        def val(tab):
            nb, ratio = tab
            v = flat[nb[idx]]
            if ghost:
                v = v + ratio[idx] * uc
            return v

        dd = {}
        for a, (plus, minus) in enumerate(self.axis):
            dd[a] = (val(plus) + val(minus) - 2.0 * uc) / h[a] ** 2
        dx = {}
        for (a, b), tabs in self.pairs.items():
            pp, pm, mp, mm = (val(t) for t in tabs)
            dx[(a, b)] = (pp - pm - mp + mm) / (4.0 * h[a] * h[b])
        return dd, dx

    def assemble(self, dd, dx):
        n = self.grid.n
        size = len(next(iter(dd.values())))
        H = np.zeros((size, n, n), dtype=complex)
        for j in range(n):
            H[:, j, j] = 0.25 * (dd[2 * j] + dd[2 * j + 1])
        for j in range(n):
            for k in range(j + 1, n):
                xj, yj, xk, yk = 2 * j, 2 * j + 1, 2 * k, 2 * k + 1
                re = dx[(xj, xk)] + dx[(yj, yk)]
                im = dx[(xj, yk)] - dx[(yj, xk)]
                H[:, j, k] = 0.25 * (re + 1j * im)
                H[:, k, j] = np.conj(H[:, j, k])
        return H

    def _center_coefficients(self):
        """Hessian of the stencil's response to a unit value at the centre node."""
        zeros = np.zeros(self.grid.size)
        ones = np.ones(len(self.index))
        dd, dx = self.second_differences(zeros, ones)
        return self.assemble(dd, dx)

    def hessian(self, flat, ghost=True, sel=None):
        uc = flat[self.index if sel is None else self.index[sel]]
        dd, dx = self.second_differences(flat, uc, sel=sel, ghost=ghost)
        return self.assemble(dd, dx)


def stencil(grid: Grid) -> Stencil:
    if grid._stencil is None:
        grid._stencil = Stencil(grid)
    return grid._stencil


@dataclass
class HermitianField:
    """Per-interior-node n x n Hermitian matrices on a grid."""

    grid: Grid
    index: np.ndarray  # flat node indices
    matrices: np.ndarray  # (nodes, n, n) complex

    def eigenvalues(self) -> np.ndarray:
        return hermitian_eigenvalues(self.matrices)


def hermitian_eigenvalues(H: np.ndarray) -> np.ndarray:
    """Eigenvalues of a stack of Hermitian matrices; closed form for n <= 2."""
    n = H.shape[-1]
    if n == 1:
        return H[..., 0, 0].real[..., None].copy()
    if n == 2:
        a = H[..., 0, 0].real
        d = H[..., 1, 1].real
        b2 = np.abs(H[..., 0, 1]) ** 2
        mean = 0.5 * (a + d)
        rad = np.sqrt(0.25 * (a - d) ** 2 + b2)
        return np.stack([mean - rad, mean + rad], axis=-1)
    return np.linalg.eigvalsh(H)


def complex_hessian(u: GridPotential) -> HermitianField:
    if not isinstance(u, GridPotential):
        raise TypeError("complex_hessian needs a grid potential")
    st = stencil(u.carrier)
    H = st.hessian(u.values.ravel(), ghost=u.dirichlet)
    H = 0.5 * (H + np.conj(np.swapaxes(H, -1, -2)))
    return HermitianField(u.carrier, st.index, H)


def sigma_k(field: HermitianField, k: int) -> np.ndarray:
    """sigma_k at each interior node (as a flat array aligned with ``field.index``)."""
    n = field.matrices.shape[-1]
    if k > n:
        raise ValueError(f"k={k} exceeds n={n}")
    if k == 0:
        return np.ones(len(field.index))
    return elementary_symmetric(field.eigenvalues(), k)


def _to_full(grid: Grid, index, values) -> np.ndarray:
    out = np.zeros(grid.size)
    out[index] = values
    return out.reshape(grid.shape)


# ---------------------------------------------------------------------------
# radial profiles


def radial_flux(v: RadialPotential, k: int) -> np.ndarray:
    """Discrete fluxes h * rho^n * (v')^k at cell midpoints, plus the boundary flux."""
    c = v.carrier
    g = v.slopes()
    inner = c.flux_weights * g**k
    top = c.h * c.rho1**c.n * g[-1] ** k
    return np.concatenate((inner, [top]))


def radial_density_k(v: RadialPotential, k: int) -> np.ndarray:
    """sigma_k / C(n,k) per node (cell average over the dual cell)."""
    c = v.carrier
    flux = radial_flux(v, k)
    jumps = np.diff(np.concatenate(([0.0], flux)))
    return (4.0 * math.pi) ** c.n * jumps / (c.h * c.weights)


def radial_certificate(v: RadialPotential, m: int, tol: float = 1e-10):
    """Smallest normalized sigma_k (k <= m) and its node, for a radial profile."""
    scale = max(1.0, float(np.max(np.abs(v.slopes()))) ** m)
    worst, where, kworst = np.inf, 0, 1
    for k in range(1, m + 1):
        d = radial_density_k(v, k) * math.comb(v.n, k)
        i = int(np.argmin(d))
        if d[i] / scale ** (k / m) < worst:
            worst, where, kworst = d[i] / scale ** (k / m), i, k
    return worst, where, kworst


def radial_hessian_measure(v: RadialPotential, m: int, tol: float = 1e-9) -> np.ndarray:
    """Density of (dd^c v)^m ^ beta^(n-m) w.r.t. beta^n on the radial carrier."""
    n = v.n
    if not 1 <= m <= n:
        raise ValueError(f"need 1 <= m <= n, got m={m}, n={n}")
    worst, where, k = radial_certificate(v, m)
    if worst < -tol:
        raise ConeError(
            f"not m-subharmonic: sigma_{k} = {worst:.3e} at node {where}",
            ConeReport(m, worst, where, False, k),
        )
    return radial_density_k(v, m)


def radial_sigma_from_derivatives(dv, d2v, rho, m: int, n: int) -> np.ndarray:
    """sigma_m from the radial Hessian eigenvalues (v' x (n-1), v' + rho v'')."""
    dv = np.asarray(dv, dtype=float)
    eigs = np.repeat(dv[..., None], n, axis=-1)
    eigs[..., -1] = dv + np.asarray(rho) * np.asarray(d2v)
    return elementary_symmetric(eigs, m)


def radial_sigma_flux_formula(dv, d2v, rho, m: int, n: int) -> np.ndarray:
    """Continuous flux form expanded with the product rule."""
    dv = np.asarray(dv, dtype=float)
    rho = np.asarray(rho, dtype=float)
    # (1/rho^(n-1)) d/drho (rho^n dv^m) = n dv^m + m rho dv^(m-1) d2v
    flux_derivative = n * dv**m + m * rho * dv ** (m - 1) * np.asarray(d2v)
    return math.comb(n - 1, m - 1) / m * flux_derivative


# ---------------------------------------------------------------------------
# public dispatch


def hessian_measure_density(u, m: int) -> np.ndarray:
    """Density of (dd^c u)^m ^ beta^(n-m) relative to beta^n, on u's carrier."""
    n = u.n
    if not 1 <= m <= n:
        raise ValueError(f"need 1 <= m <= n, got m={m}, n={n}")
    if isinstance(u, RadialPotential):
        return radial_hessian_measure(u, m)
    field = complex_hessian(u)
    return _to_full(u.carrier, field.index, measure_factor(m, n) * sigma_k(field, m))


def hessian_measure_density_unchecked(u, m: int) -> np.ndarray:
    if isinstance(u, RadialPotential):
        return radial_density_k(u, m)
    return hessian_measure_density(u, m)


@dataclass
class ConeReport:
    m: int
    min_sigma: float
    worst_node: int
    passed: bool
    worst_k: int = 1


def is_m_subharmonic(u, m: int, tol: float = 1e-8) -> ConeReport:
    """Check sigma_k >= -tol for every k <= m at every interior node."""
    if isinstance(u, RadialPotential):
        worst, where, k = radial_certificate(u, m)
        return ConeReport(m, float(worst), int(where), bool(worst >= -tol), k)
    field = complex_hessian(u)
    eigs = field.eigenvalues()
    worst, where, kworst = np.inf, -1, 1
    for k in range(1, m + 1):
        s = elementary_symmetric(eigs, k)
        i = int(np.argmin(s))
        if s[i] < worst:
            worst, where, kworst = float(s[i]), int(field.index[i]), k
    return ConeReport(m, worst, where, bool(worst >= -tol), kworst)


def in_cone(eigs: np.ndarray, m: int, tol: float = 0.0) -> np.ndarray:
    eigs = np.asarray(eigs, dtype=float)
    ok = np.ones(eigs.shape[:-1], dtype=bool)
    for k in range(1, m + 1):
        ok &= elementary_symmetric(eigs, k) >= -tol
    return ok


def cone_retract(eigs, m: int, tol: float = 1e-12) -> np.ndarray:
    """Shift eigenvalues along the diagonal into the closed Garding cone.

    Returns eigs + t* 1 with t* the least t >= 0 placing the vector in Gamma_m,
    found by bisection.  Works on a single vector or a stack.
    """
    lam = np.asarray(eigs, dtype=float)
    single = lam.ndim == 1
    lam = np.atleast_2d(lam)
    lo = np.zeros(lam.shape[0])
    hi = 1.0 + np.abs(np.minimum(lam.min(axis=-1), 0.0))
    # the bracket only needs growing if the cone test still fails at hi
    while True:
        bad = ~in_cone(lam + hi[:, None], m)
        if not bad.any():
            break
        hi[bad] *= 2.0
    done = in_cone(lam, m)
    hi[done] = 0.0
    while np.any(hi - lo > tol):
        mid = 0.5 * (lo + hi)
        ok = in_cone(lam + mid[:, None], m)
        hi = np.where(ok, mid, hi)
        lo = np.where(ok, lo, mid)
    out = lam + hi[:, None]
    return out[0] if single else out
