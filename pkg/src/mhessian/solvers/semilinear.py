"""Semilinear problems (dd^c u)^m ^ beta^(n-m) = G(z, u) mu, u = 0 on the boundary."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from mhessian.fields import DensityMeasure, RadialGrid
from mhessian.functionals import RhsFamily, semilinear_functional
from mhessian.hessian import hessian_measure_density_unchecked
from mhessian.solvers.dirichlet import dirichlet_solve
from mhessian.solvers.runlog import RunLog

T_TO_INFINITY = -(2.0 ** np.arange(0, 31))
T_TO_ZERO = -(2.0 ** -np.arange(1, 31))


class HypothesisError(ValueError):
    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


@dataclass
class HReport:
    threshold: float
    h2_sequence: np.ndarray
    h3_sequence: np.ndarray
    h2_proxy: float
    h3_proxy: float
    h2_status: str
    h3_status: str

    @property
    def h2_passed(self) -> bool:
        return self.h2_status == "pass"

    @property
    def h3_passed(self) -> bool:
        return self.h3_status == "pass"


def _settled(seq, scale):
    tail = seq[-4:]
    return float(np.max(tail) - np.min(tail)) <= 1e-6 * max(abs(scale), abs(tail[-1]), 1e-300)


def check_H_hypotheses(family: RhsFamily, lam1: float, m: int, x=None) -> HReport:
    """Growth of H(z,t)/|t|^(m+1) at -infinity (H2) and at 0- (H3).

    ``x`` holds sample points for z (carrier coordinates); sup/inf over them
    are taken for H2/H3.  A status is "indeterminate" when the sequence has
    not settled and sits on the wrong side of the threshold.
    """
    if not lam1 > 0:
        raise ValueError("lam1 must be positive")
    thr = lam1**m / (m + 1)
    xs = np.zeros(1) if x is None else np.asarray(x)

    def ratio(t):
        H = np.asarray(family.H(xs, np.full(xs.shape, t)), dtype=float)
        return H / abs(t) ** (m + 1)

    h2 = np.array([float(np.max(ratio(t))) for t in T_TO_INFINITY])
    h3 = np.array([float(np.min(ratio(t))) for t in T_TO_ZERO])
    h2_proxy = float(np.max(h2[-4:]))
    h3_proxy = float(np.min(h3[-4:]))

    if h2_proxy < thr and (_settled(h2, thr) or np.all(np.diff(h2[-4:]) <= 0)):
        s2 = "pass"
    elif h2_proxy >= thr and (_settled(h2, thr) or np.all(np.diff(h2[-4:]) >= 0)):
        s2 = "fail"
    else:
        s2 = "indeterminate"
    if h3_proxy > thr and (_settled(h3, thr) or np.all(np.diff(h3[-4:]) >= 0)):
        s3 = "pass"
    elif h3_proxy <= thr and (_settled(h3, thr) or np.all(np.diff(h3[-4:]) <= 0)):
        s3 = "fail"
    else:
        s3 = "indeterminate"
    return HReport(thr, h2, h3, h2_proxy, h3_proxy, s2, s3)


@dataclass
class SemilinearResult:
    potential: object
    residual: float
    iterations: int
    converged: bool
    phi_history: list
    phi_monotone: bool
    h_report: Optional[HReport] = None
    log: RunLog = field(default_factory=RunLog)


def _coords_of(carrier):
    return carrier.rho if isinstance(carrier, RadialGrid) else carrier.z


def semilinear_residual(u, family: RhsFamily, mu: DensityMeasure, m: int) -> float:
    c = u.carrier
    w = c.weights * c.interior
    rhs = np.asarray(family.G(_coords_of(c), u.values)) * mu.density
    dens = hessian_measure_density_unchecked(u, m)
    denom = float(np.sum(np.abs(rhs) * w))
    num = float(np.sum(np.abs(dens - rhs) * w))
    return num / denom if denom > 0 else num


def solve_semilinear(
    family: RhsFamily,
    mu: DensityMeasure,
    m: int,
    tol: float = 1e-10,
    max_iter: int = 2000,
    lam1: Optional[float] = None,
    burn_in: int = 3,
) -> SemilinearResult:
    """Picard iteration u <- Solve(G(., u) g).

    Refuses to run unless the H2 growth condition passes against ``lam1``
    (computed by inverse iteration when not given).
    """
    carrier = mu.carrier
    x = _coords_of(carrier)
    g = mu.density
    family.check_nonnegative(x)
    if lam1 is None:
        from mhessian.solvers.eigen import eigen_inverse_iteration

        lam1 = eigen_inverse_iteration(mu, m).lam
    report = check_H_hypotheses(family, lam1, m, x[carrier.weights > 0] if x.ndim == 1 else None)
    if not report.h2_passed:
        raise HypothesisError(
            f"H2 growth condition not met (proxy {report.h2_proxy:.6g} vs {report.threshold:.6g}): "
            "the functional is not coercive",
            report,
        )

    def rhs(u_vals):
        return np.asarray(np.broadcast_to(family.G(x, u_vals), carrier.shape)) * g

    zero = np.zeros(carrier.shape)
    if family.vanishes_at_zero and not np.any(rhs(zero)):
        # u = 0 is a trivial fixed point; start from Solve(g) instead
        u = dirichlet_solve(g, m, carrier)
    else:
        u = dirichlet_solve(rhs(zero), m, carrier)
    log = RunLog()
    phis = [semilinear_functional(u, family, mu, m)]
    log.record(0, math.nan, phis[0])
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        kw = {} if isinstance(carrier, RadialGrid) or m == 1 else {"init": u}
        new = dirichlet_solve(rhs(u.values), m, carrier, **kw)
        change = float(np.max(np.abs(new.values - u.values)))
        u = new
        phis.append(semilinear_functional(u, family, mu, m))
        log.record(it, change, phis[-1])
        if not np.isfinite(change) or change > 1e12:
            raise RuntimeError("semilinear iteration diverged")
        if change <= tol * max(1.0, float(np.max(np.abs(u.values)))):
            converged = True
            break
    tail = np.asarray(phis[burn_in:])
    slack = 1e-10 * max(1.0, float(np.max(np.abs(tail)))) if len(tail) else 0.0
    monotone = bool(np.all(np.diff(tail) <= slack))
    res = semilinear_residual(u, family, mu, m)
    return SemilinearResult(u, res, it, converged, phis, monotone, report, log)
