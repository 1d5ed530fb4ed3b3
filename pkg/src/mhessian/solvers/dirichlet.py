"""Dirichlet problems (dd^c u)^m ^ beta^(n-m) = f beta^n, u = 0 on the boundary.

Radial carrier: the discrete flux recursion is solved exactly, one cell at a
time, so the result reproduces ``f`` to rounding error under
``radial_hessian_measure``.

Grid carrier: m = 1 is a sparse linear solve.  m = 2 (n = 2) uses nonlinear
Gauss-Seidel over 2^(2n) parity colours; in each node sigma_2 is a quadratic
in the node's own value, and the root on the Garding-cone branch is taken.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator, cg, splu

from mhessian.fields import Grid, GridPotential, RadialGrid, RadialPotential
from mhessian.hessian import hessian_measure_density_unchecked, measure_factor, stencil


class DivergenceError(RuntimeError):
    pass


@dataclass
class SolveInfo:
    residual: float
    sweeps: int
    converged: bool
    history: list = field(default_factory=list)


def _sample(f, carrier):
    if callable(f):
        vals = f(carrier.coordinates())
    else:
        vals = f
    vals = np.array(np.broadcast_to(vals, carrier.shape), dtype=float)
    return vals


# ---------------------------------------------------------------------------
# radial


def dirichlet_solve_radial(f, m: int, carrier: RadialGrid) -> RadialPotential:
    """Exact discrete solution on a radial carrier.

    ``f`` is a density w.r.t. beta^n: an array on the carrier or a callable of rho.
    """
    n = carrier.n
    if not 1 <= m <= n:
        raise ValueError(f"need 1 <= m <= n, got m={m}, n={n}")
    fv = _sample(f, carrier)
    if np.any(fv[:-1] < 0):
        raise ValueError("right-hand side must be nonnegative")
    increments = carrier.h * carrier.weights[:-1] * fv[:-1] / (4.0 * math.pi) ** n
    flux = np.cumsum(increments)
    slopes = (flux / carrier.flux_weights) ** (1.0 / m)
    values = np.zeros(carrier.points)
    values[:-1] = -carrier.h * np.cumsum(slopes[::-1])[::-1]
    return RadialPotential(carrier, values)


# ---------------------------------------------------------------------------
# grid


def _trace_matrix(grid: Grid):
    """Sparse matrix of u -> sigma_1(u)/n on the interior unknowns and its solver.

    The matrix is symmetric negative definite (ghost ratios only enter the
    diagonal).  Planar grids are factorised; 4-d grids use Jacobi-preconditioned
    CG, since LU fill-in grows too fast there.
    """
    cache = getattr(grid, "_trace_cache", None)
    if cache is not None:
        return cache
    st = stencil(grid)
    n = grid.n
    count = len(st.index)
    rows, cols, vals = [], [], []
    center = np.zeros(count)
    for a, tabs in enumerate(st.axis):
        w = 1.0 / (4.0 * grid.h[a] ** 2 * n)
        center -= 2.0 * w
        for nb, ratio in tabs:
            slot = st.slot[nb]
            inside = slot >= 0
            rows.append(np.flatnonzero(inside))
            cols.append(slot[inside])
            vals.append(np.full(int(inside.sum()), w))
            center += w * ratio
    rows.append(np.arange(count))
    cols.append(np.arange(count))
    vals.append(center)
    A = sp.csc_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(count, count)
    )
    if grid.n == 1:
        solve = splu(A).solve
    else:
        neg = (-A).tocsr()
        inv_diag = 1.0 / neg.diagonal()
        M = LinearOperator(neg.shape, matvec=lambda x: inv_diag * x)

        def solve(b):
            x, status = cg(neg, -b, rtol=1e-13, atol=0.0, maxiter=20 * count, M=M)
            if status != 0:
                raise RuntimeError("conjugate gradients did not converge")
            return x

    cache = (A, solve)
    grid._trace_cache = cache
    return cache


def grid_residual(u: GridPotential, f: np.ndarray, m: int) -> float:
    dens = hessian_measure_density_unchecked(u, m)
    w = u.carrier.weights * u.carrier.interior
    denom = float(np.sum(np.abs(f) * w))
    num = float(np.sum(np.abs(dens - f) * w))
    return num / denom if denom > 0 else num


def local_update(st, flat: np.ndarray, sel: np.ndarray, m: int, target: np.ndarray) -> np.ndarray:
    """Value at nodes ``sel`` making the Hessian density equal ``target``.

    Neighbours are frozen.  For target 0 this is the largest value keeping the
    node's Hessian in the closed cone Gamma_m (``inf`` if no constraint binds).
    """
    n = st.grid.n
    uc = flat[st.index[sel]]
    H = st.hessian(flat, sel=sel)
    Q = st.center_coeff[sel]
    P = H - uc[:, None, None] * Q
    sig = target / measure_factor(m, n)
    if m == 1:
        trP = np.real(np.trace(P, axis1=1, axis2=2))
        trQ = np.real(np.trace(Q, axis1=1, axis2=2))
        return (sig - trP) / trQ
    if n == 2 and m == 2:
        p11, p22, p12 = P[:, 0, 0].real, P[:, 1, 1].real, P[:, 0, 1]
        q11, q22, q12 = Q[:, 0, 0].real, Q[:, 1, 1].real, Q[:, 0, 1]
        a = q11 * q22 - np.abs(q12) ** 2
        b = p11 * q22 + q11 * p22 - 2.0 * np.real(p12 * np.conj(q12))
        c = p11 * p22 - np.abs(p12) ** 2 - sig
        if np.any(a <= 0):
            raise RuntimeError("degenerate local quadratic in the sigma_2 update")
        disc = b * b - 4.0 * a * c
        root = (-b - np.sqrt(np.maximum(disc, 0.0))) / (2.0 * a)
        # no root: det exceeds the target for every value
        fallback = np.where(sig == 0, np.inf, -b / (2.0 * a))
        root = np.where(disc < 0, fallback, root)
        # the root must sit on the branch where both diagonal entries are >= 0
        cap = np.minimum(-p11 / q11, -p22 / q22)
        return np.minimum(root, cap)
    raise ValueError(f"grid local update not available for m={m}, n={n}")


def dirichlet_solve_grid(
    f,
    m: int,
    grid: Grid,
    tol: float = 1e-10,
    max_sweeps: int = 20000,
    init: Optional[GridPotential] = None,
    omega: float = 1.0,
    full_output: bool = False,
):
    """Solve on a grid carrier; returns the potential (and ``SolveInfo``)."""
    n = grid.n
    if not 1 <= m <= n:
        raise ValueError(f"need 1 <= m <= n, got m={m}, n={n}")
    fv = _sample(f, grid)
    fv[~grid.interior] = 0.0
    if np.any(fv < 0):
        raise ValueError("right-hand side must be nonnegative")
    st = stencil(grid)
    if m == 1:
        _, solve = _trace_matrix(grid)
        sol = solve(fv.ravel()[st.index])
        flat = np.zeros(grid.size)
        flat[st.index] = sol
        u = GridPotential(grid, flat.reshape(grid.shape))
        info = SolveInfo(grid_residual(u, fv, m), 0, True)
        return (u, info) if full_output else u

    if init is None:
        # Maclaurin: sigma_1/n >= (sigma_m/C(n,m))^(1/m), equality for |z|^2 data
        init = dirichlet_solve_grid(fv ** (1.0 / m), 1, grid)
    flat = init.values.ravel().copy()
    target = fv.ravel()[st.index]
    history = []
    converged = False
    sweeps = 0
    for sweeps in range(1, max_sweeps + 1):
        change = 0.0
        for color in st.colors:
            new = local_update(st, flat, color, m, target[color])
            old = flat[st.index[color]]
            upd = old + omega * (new - old)
            change = max(change, float(np.max(np.abs(upd - old))))
            flat[st.index[color]] = upd
        scale = max(1e-300, float(np.max(np.abs(flat))))
        if sweeps % 100 == 0:
            res = grid_residual(GridPotential(grid, flat.reshape(grid.shape)), fv, m)
            history.append(res)
            if len(history) >= 2 and res > 10.0 * history[-2]:
                raise DivergenceError(f"residual grew from {history[-2]:.3e} to {res:.3e}")
        if change <= tol * scale:
            converged = True
            break
    u = GridPotential(grid, flat.reshape(grid.shape))
    info = SolveInfo(grid_residual(u, fv, m), sweeps, converged, history)
    return (u, info) if full_output else u


def dirichlet_solve(f, m: int, carrier, **kw):
    if isinstance(carrier, RadialGrid):
        return dirichlet_solve_radial(f, m, carrier)
    return dirichlet_solve_grid(f, m, carrier, **kw)
