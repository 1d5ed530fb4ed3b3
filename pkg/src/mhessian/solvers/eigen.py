"""First eigenpair of (dd^c u)^m ^ beta^(n-m) = (-lam u)^m mu.

Two solvers share the same Dirichlet back end:

* inverse iteration  u <- Solve((-u)^m g), renormalized to I_m(u) = 1;
  at a fixed point the normalization constant equals lam;
* projected descent on Phi = E_m - lam^m I_m with the preconditioned
  gradient Solve(lam^m (-u)^m g) - u, a backtracking line search on the
  Rayleigh quotient and the envelope retraction max-admissible(min(u, 0)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
import numpy as np

from mhessian.fields import DensityMeasure, RadialGrid
from mhessian.functionals import energy_Em, twisted_Im
from mhessian.hessian import hessian_measure_density_unchecked
from mhessian.solvers.dirichlet import dirichlet_solve
from mhessian.solvers.runlog import RunLog


@dataclass
class EigenResult:
    lam: float
    eigenfunction: object
    residual_l1: float
    rayleigh_history: list
    iterations: int
    converged: bool
    lam_normalization: float = math.nan
    log: RunLog = field(default_factory=RunLog)


def eigen_residual(u, lam: float, mu: DensityMeasure, m: int) -> float:
    """Relative weighted L1 defect of the eigen equation on interior nodes."""
    c = u.carrier
    w = c.weights * c.interior
    rhs = lam**m * np.maximum(-u.values, 0.0) ** m * mu.density
    dens = hessian_measure_density_unchecked(u, m)
    denom = float(np.sum(rhs * w))
    return float(np.sum(np.abs(dens - rhs) * w)) / denom if denom > 0 else math.inf


def _normalize(u, mu, m):
    Im = twisted_Im(u, mu, m)
    if not Im > 0:
        raise ValueError("iterate vanishes mu-almost everywhere")
    c = Im ** (-1.0 / (m + 1))
    return u.scaled(c), c


def _rayleigh(u, mu, m):
    return (energy_Em(u, m) / twisted_Im(u, mu, m)) ** (1.0 / m)


def _solve(f, m, carrier, previous):
    if isinstance(carrier, RadialGrid):
        return dirichlet_solve(f, m, carrier)
    if m == 1:
        return dirichlet_solve(f, m, carrier)
    return dirichlet_solve(f, m, carrier, init=previous, tol=1e-12)


def eigen_inverse_iteration(
    mu: DensityMeasure,
    m: int,
    init=None,
    tol: float = 1e-10,
    max_iter: int = 500,
    res_tol: float = 1e-8,
) -> EigenResult:
    carrier = mu.carrier
    g = mu.density
    if init is None:
        init = _solve(g, m, carrier, None)
    if np.max(init.values) > 0 or not np.any(init.values < 0):
        raise ValueError("initial guess must be <= 0 and not identically 0")
    u, _ = _normalize(init, mu, m)
    history = []
    log = RunLog()
    lam_prev = _rayleigh(u, mu, m)
    history.append(lam_prev)
    log.record(0, lam_prev, energy_Em(u, m))
    c = math.nan
    converged = False
    it = 0
    res = math.inf
    for it in range(1, max_iter + 1):
        prev_scale = None if isinstance(carrier, RadialGrid) else u
        w = _solve((-u.values) ** m * g, m, carrier, prev_scale)
        u, c = _normalize(w, mu, m)
        lam = _rayleigh(u, mu, m)
        history.append(lam)
        res = eigen_residual(u, lam, mu, m)
        log.record(it, lam, energy_Em(u, m))
        if abs(lam - lam_prev) <= tol * lam and res <= res_tol:
            converged = True
            break
        lam_prev = lam
    return EigenResult(lam, u, res, history, it, converged, c, log)


def _retract(v, m):
    """Largest admissible potential below min(v, 0)."""
    from mhessian.envelope import envelope_Pm

    capped = v.with_values(np.minimum(v.values, 0.0))
    return envelope_Pm(capped, m, tol=1e-12)


def eigen_rayleigh_descent(
    mu: DensityMeasure,
    m: int,
    init=None,
    steps: int = 200,
    step_size: float = 1.0,
    tol: float = 1e-10,
    max_rejections: int = 50,
) -> EigenResult:
    carrier = mu.carrier
    g = mu.density
    if init is None:
        init = _solve(g, m, carrier, None)
    u, _ = _normalize(_retract(init, m), mu, m)
    lam = _rayleigh(u, mu, m)
    history = [lam]
    log = RunLog()
    log.record(0, lam, energy_Em(u, m))
    converged = False
    it = 0
    for it in range(1, steps + 1):
        target = _solve(lam**m * (-u.values) ** m * g, m, carrier, u)
        d = target.values - u.values
        s = step_size
        for _ in range(max_rejections + 1):
            trial = _retract(u.with_values(u.values + s * d), m)
            if np.any(trial.values < 0):
                trial, _ = _normalize(trial, mu, m)
                lam_trial = _rayleigh(trial, mu, m)
                if lam_trial <= lam * (1.0 + 1e-10):
                    break
            s *= 0.5
        else:
            raise RuntimeError(f"step rejected more than {max_rejections} times in a row")
        change = abs(lam - lam_trial)
        u, lam = trial, lam_trial
        history.append(lam)
        log.record(it, lam, energy_Em(u, m))
        if change <= tol * lam:
            converged = True
            break
    res = eigen_residual(u, lam, mu, m)
    return EigenResult(lam, u, res, history, it, converged, math.nan, log)
