"""Empirical checks of integral inequalities, scaling laws and Dini-type integrals.

Every check returns a ``CheckReport`` with the sample count, the worst ratio
seen and one CSV row per sample.  Inequalities with unknown constants are
only checked for what can be tested: finiteness, homogeneity, and corpus
suprema.  Random corpora are seeded and the seed is written into every CSV.
"""

from __future__ import annotations

import hashlib
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.integrate import IntegrationWarning, quad

from mhessian.envelope import Condenser, capacity_cm
from mhessian.fields import RadialGrid, RadialPotential, beta_measure, make_density_measure, make_radial_grid
from mhessian.functionals import energy_Em, twisted_Im
from mhessian.hessian import (
    ConeError,
    hessian_measure_density,
    radial_sigma_flux_formula,
    radial_sigma_from_derivatives,
)
from mhessian.solvers.dirichlet import dirichlet_solve_radial
from mhessian.solvers.eigen import eigen_inverse_iteration
from mhessian.solvers.eigen import eigen_residual as _eigen_residual


@dataclass
class CheckReport:
    name: str
    samples: int
    worst_ratio: float
    passed: bool
    rows: list = field(default_factory=list)
    seed: Optional[int] = None
    notes: list = field(default_factory=list)
    csv_path: Optional[str] = None

    columns = ("sample", "inputs_hash", "lhs", "rhs", "ratio")

    def to_csv(self) -> str:
        lines = [f"# check={self.name} seed={self.seed}", ",".join(self.columns)]
        for i, (h, lhs, rhs, ratio) in enumerate(self.rows):
            lines.append(f"{i},{h},{lhs:.17g},{rhs:.17g},{ratio:.17g}")
        return "\n".join(lines) + "\n"

    def write(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_csv())
        self.csv_path = str(path)

    @property
    def violations(self) -> int:
        return sum(1 for r in self.rows if not r[3] <= 1.0 + 1e-6) if self.name == "blocki" else 0


def inputs_hash(*arrays) -> str:
    h = hashlib.sha256()
    for a in arrays:
        h.update(np.ascontiguousarray(np.asarray(a, dtype=float)).tobytes())
    return h.hexdigest()[:16]


def _int_beta(values, carrier) -> float:
    return float(np.sum(values * carrier.weights))


# ---------------------------------------------------------------------------
# random admissible profiles


def random_profile(carrier: RadialGrid, m: int, rng: np.random.Generator) -> RadialPotential:
    """Solve(f) for a random nonnegative piecewise-linear f.

    The discrete flux rho^n (v')^m is then nondecreasing, so the profile is
    exactly discretely m-subharmonic, negative inside and zero on the boundary.
    """
    knots = np.linspace(0.0, carrier.rho1, int(rng.integers(2, 7)))
    vals = rng.uniform(0.0, 2.0, size=knots.size)
    vals[rng.integers(0, knots.size)] += 0.5  # keep the total mass positive
    f = np.interp(carrier.rho, knots, vals) * rng.uniform(0.2, 5.0)
    return dirichlet_solve_radial(f, m, carrier)


def random_corpus(count: int, seed: int, points: int = 401, max_n: int = 4):
    """Yield (n, m, u, w) with u, w random admissible profiles on one carrier."""
    rng = np.random.default_rng(seed)
    for _ in range(count):
        n = int(rng.integers(1, max_n + 1))
        m = int(rng.integers(1, n + 1))
        carrier = make_radial_grid(n, points, radius=float(rng.uniform(0.5, 2.0)))
        yield n, m, random_profile(carrier, m, rng), random_profile(carrier, m, rng)


# ---------------------------------------------------------------------------
# Blocki-type inequality


def blocki_sides(u, w, m: int):
    if not u.carrier.same_as(w.carrier):
        raise ValueError("carrier mismatch")
    dw = hessian_measure_density(w, m)
    du = hessian_measure_density(u, m)
    lhs = _int_beta(np.maximum(-u.values, 0.0) ** (m + 1) * dw, u.carrier)
    rhs = math.factorial(m + 1) * float(np.max(np.abs(w.values))) ** m * _int_beta(-u.values * du, u.carrier)
    return lhs, rhs


def check_blocki(u, w, m: int) -> CheckReport:
    """int (-u)^(m+1) (dd^c w)^m ^ b^(n-m) <= (m+1)! |w|^m int (-u)(dd^c u)^m ^ b^(n-m)."""
    lhs, rhs = blocki_sides(u, w, m)
    ratio = lhs / rhs if rhs > 0 else (0.0 if lhs == 0 else math.inf)
    ok = lhs <= rhs * (1 + 1e-6)
    return CheckReport("blocki", 1, ratio, ok, [(inputs_hash(u.values, w.values), lhs, rhs, ratio)])


def check_blocki_corpus(count: int = 100, seed: int = 0, points: int = 401) -> CheckReport:
    rows = []
    for n, m, u, w in random_corpus(count, seed, points):
        lhs, rhs = blocki_sides(u, w, m)
        rows.append((inputs_hash(u.values, w.values), lhs, rhs, lhs / rhs))
    worst = max(r[3] for r in rows)
    ok = all(r[1] <= r[2] * (1 + 1e-6) for r in rows)
    return CheckReport("blocki", len(rows), worst, ok, rows, seed)


# ---------------------------------------------------------------------------
# Sobolev-Poincare inequality


def check_sobolev_poincare(phi, mu, m: int) -> CheckReport:
    """Ratio int (-phi)^(m+1) dmu / E_m(phi); passes when finite."""
    lhs = (m + 1) * twisted_Im(phi, mu, m)
    E = energy_Em(phi, m)
    if E <= 0:
        if lhs > 0:
            raise ValueError("E_m = 0 for a nonzero potential: discretisation pathology")
        ratio = 0.0
    else:
        ratio = lhs / E
    return CheckReport(
        "sobolev_poincare", 1, ratio, bool(np.isfinite(ratio)), [(inputs_hash(phi.values), lhs, E, ratio)]
    )


def check_sobolev_corpus(
    n: int, m: int, count: int = 100, seed: int = 0, points: int = 401, slack: float = 0.05
) -> CheckReport:
    """Corpus sup of I_m/E_m against 1/lam1^m on the same carrier."""
    rng = np.random.default_rng(seed)
    carrier = make_radial_grid(n, points)
    mu = beta_measure(carrier)
    lam1 = eigen_inverse_iteration(mu, m).lam
    rows = []
    for _ in range(count):
        phi = random_profile(carrier, m, rng)
        Im, E = twisted_Im(phi, mu, m), energy_Em(phi, m)
        rows.append((inputs_hash(phi.values), Im, E, Im / E))
    worst = max(r[3] for r in rows)
    bound = lam1 ** (-m) * (1 + slack)
    rep = CheckReport("sobolev_poincare", count, worst, bool(np.isfinite(worst) and worst <= bound), rows, seed)
    rep.notes.append(f"lam1={lam1:.17g} bound={bound:.17g}")
    return rep


# ---------------------------------------------------------------------------
# capacity of sublevel sets against the energy


def capacity_energy_ratio(phi, s: float, m: int) -> float:
    """c_m({phi < -s}) s^(m+1) / E_m(phi); nan when the sublevel set is unusable."""
    mask = phi.values < -s
    try:
        cond = Condenser(phi.carrier, mask)
    except ValueError:
        return math.nan
    cap = capacity_cm(cond, m).mass_version
    return cap * s ** (m + 1) / energy_Em(phi, m)


def check_capacity_energy(phi, s_values: Sequence[float], m: int, scales=(0.5, 2.0)) -> CheckReport:
    rows, notes = [], []
    ok = True
    worst = 0.0
    for s in s_values:
        r = capacity_energy_ratio(phi, s, m)
        if math.isnan(r):
            notes.append(f"s={s:.17g}: sublevel set empty or touching the boundary, skipped")
            continue
        for c in scales:
            rc = capacity_energy_ratio(phi.scaled(c), c * s, m)
            rel = abs(rc - r) / r
            ok &= bool(np.isfinite(r) and rel <= 0.02)
            rows.append((inputs_hash(phi.values, [s, c]), r, rc, rc / r))
        worst = max(worst, r)
    if not rows:
        ok = False
        notes.append("no usable sublevel set")
    return CheckReport("capacity_energy", len(rows), worst, ok, rows, notes=notes)


# ---------------------------------------------------------------------------
# monotonicity of lam1 in the domain


def check_monotonicity_lambda(
    radii: Sequence[float], m: int, n: int, mu_density=1.0, points: int = 2001, tol: float = 1e-3
) -> CheckReport:
    radii = [float(r) for r in radii]
    if any(b <= a for a, b in zip(radii, radii[1:])):
        raise ValueError("radii must be strictly increasing")
    lams = []
    for R in radii:
        carrier = make_radial_grid(n, points, radius=R)
        res = eigen_inverse_iteration(make_density_measure(carrier, mu_density), m)
        if not res.converged:
            raise RuntimeError(f"inverse iteration did not converge at R={R}")
        lams.append(res.lam)
    rows = [(inputs_hash([R]), R, lam, lam / lams[0]) for R, lam in zip(radii, lams)]
    ok = all(b <= a * (1 + tol) for a, b in zip(lams, lams[1:]))
    worst = max((b / a for a, b in zip(lams, lams[1:])), default=0.0)
    return CheckReport("monotonicity_lambda", len(radii), worst, ok, rows)


# ---------------------------------------------------------------------------
# diffuseness profiles and Dini-type integrals


@dataclass
class DiffusenessProfile:
    kind: str
    A: float = 1.0
    tau: float = 2.0
    t_samples: Optional[np.ndarray] = None
    g_samples: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.kind == "power_law":
            if not (self.A > 0 and self.tau > 0):
                raise ValueError("power law needs A > 0 and tau > 0")
        elif self.kind == "tabulated":
            t = np.asarray(self.t_samples, dtype=float)
            g = np.asarray(self.g_samples, dtype=float)
            if t.shape != g.shape or t.size < 2 or np.any(np.diff(t) <= 0):
                raise ValueError("tabulated profile needs increasing t samples")
            if np.any(np.diff(g) < 0) or np.any(g < 0):
                raise ValueError("Gamma must be nonnegative and nondecreasing")
            if t[0] > 0:
                t, g = np.concatenate(([0.0], t)), np.concatenate(([0.0], g))
            elif g[0] != 0:
                raise ValueError("Gamma(0) must be 0")
            self.t_samples, self.g_samples = t, g
        else:
            raise ValueError(f"unknown profile kind {self.kind!r}")

    @classmethod
    def power_law(cls, A: float, tau: float) -> "DiffusenessProfile":
        return cls("power_law", A=A, tau=tau)

    @classmethod
    def tabulated(cls, t, gamma) -> "DiffusenessProfile":
        return cls("tabulated", t_samples=t, g_samples=gamma)

    def Gamma(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == "power_law":
            return self.A * t**self.tau
        return np.interp(t, self.t_samples, self.g_samples)

    def gamma(self, t):
        return self.Gamma(t) / np.asarray(t, dtype=float)


@dataclass
class IntegralVerdict:
    verdict: str  # finite | divergent | indeterminate
    value: float
    partials: np.ndarray
    decay: float


@dataclass
class DiniReport:
    dini: IntegralVerdict
    ell: IntegralVerdict


def _decade_pieces(fn: Callable, decades: int = 12) -> np.ndarray:
    """Integrals of fn over [10^-k, 10^-(k-1)], k = 1..decades, in log t."""
    pieces = []
    for k in range(1, decades + 1):
        lo, hi = -k * math.log(10.0), -(k - 1) * math.log(10.0)
        with warnings.catch_warnings():
            # tabulated profiles have kinks at every sample; the roundoff
            # warning only says 1e-12 relative accuracy was not reached
            warnings.simplefilter("ignore", IntegrationWarning)
            val, _ = quad(lambda s: fn(math.exp(s)) * math.exp(s), lo, hi, epsabs=0.0, epsrel=1e-12, limit=200)
        pieces.append(val)
    return np.array(pieces)


def integral_verdict(fn: Callable, decades: int = 12) -> IntegralVerdict:
    """Classify int_0^1 fn(t) dt from the decade increments of its partials.

    Geometric decay of the increments gives a finite value (extrapolated with
    the geometric tail); increments that do not shrink mean divergence.
    """
    inc = _decade_pieces(fn, decades)
    partials = np.cumsum(inc)
    tail = inc[-4:]
    if np.all(np.abs(tail) <= 1e-15 * abs(partials[-1])):
        return IntegralVerdict("finite", float(partials[-1]), partials, 0.0)
    if np.any(tail <= 0):
        return IntegralVerdict("indeterminate", math.nan, partials, math.nan)
    q = tail[1:] / tail[:-1]
    qbar = float(q[-1])
    stable = float(np.max(q) - np.min(q)) <= 1e-2 * max(qbar, 1e-3)
    if qbar >= 1.0 - 1e-9:
        return IntegralVerdict("divergent", math.inf, partials, qbar)
    if stable and qbar < 1.0 - 1e-3:
        value = float(partials[-1] + inc[-1] * qbar / (1.0 - qbar))
        return IntegralVerdict("finite", value, partials, qbar)
    return IntegralVerdict("indeterminate", math.nan, partials, qbar)


def diffuseness_integrals(profile: DiffusenessProfile, m: int, r: float) -> DiniReport:
    """Dini integral int gamma^(1/m) dt/t and ell_Gamma = int Gamma / t^(1 + r/(m+1)) dt."""
    if not r > 0:
        raise ValueError("r must be positive")
    dini = integral_verdict(lambda t: float(profile.gamma(t)) ** (1.0 / m) / t)
    ell = integral_verdict(lambda t: float(profile.Gamma(t)) / t ** (1.0 + r / (m + 1)))
    return DiniReport(dini, ell)


# ---------------------------------------------------------------------------
# eigen residual and the flux-formula gate


def eigen_residual(u, lam: float, mu, m: int) -> float:
    """Relative L1 mismatch of (dd^c u)^m ^ b^(n-m) and (-lam u)^m mu."""
    r = _eigen_residual(u, lam, mu, m)
    if math.isinf(r):
        dens = np.abs(hessian_measure_density(u, m)) * u.carrier.weights * u.carrier.interior
        return 0.0 if float(np.sum(dens)) == 0 else math.inf
    return r


def flux_formula_gate(samples: int = 100, seed: int = 0, max_n: int = 4, rtol: float = 1e-6) -> CheckReport:
    """Eigenvalue-based sigma_m against the flux form on random smooth radial profiles.

    Profiles are random polynomials in rho with nonnegative coefficients
    (so v' > 0 and the radial eigenvalues stay in the positive cone); both
    sides are evaluated from exact derivatives at random radii.
    """
    rng = np.random.default_rng(seed)
    rows = []
    worst = 0.0
    for _ in range(samples):
        n = int(rng.integers(1, max_n + 1))
        m = int(rng.integers(1, n + 1))
        coef = rng.uniform(0.0, 2.0, size=int(rng.integers(2, 6)))
        coef[1] += 0.1
        p = np.polynomial.Polynomial(coef)
        rho = rng.uniform(0.01, 1.0, size=32)
        dv, d2v = p.deriv(1)(rho), p.deriv(2)(rho)
        a = radial_sigma_from_derivatives(dv, d2v, rho, m, n)
        b = radial_sigma_flux_formula(dv, d2v, rho, m, n)
        rel = float(np.max(np.abs(a - b) / np.maximum(np.abs(a), 1e-300)))
        worst = max(worst, rel)
        rows.append((inputs_hash(coef, rho, [n, m]), float(np.max(a)), float(np.max(b)), rel))
    return CheckReport("flux_formula", samples, worst, worst <= rtol, rows, seed)


__all__ = [
    "CheckReport",
    "ConeError",
    "DiffusenessProfile",
    "DiniReport",
    "IntegralVerdict",
    "check_blocki",
    "check_blocki_corpus",
    "check_capacity_energy",
    "check_monotonicity_lambda",
    "check_sobolev_corpus",
    "check_sobolev_poincare",
    "diffuseness_integrals",
    "eigen_residual",
    "flux_formula_gate",
    "integral_verdict",
    "random_corpus",
    "random_profile",
]
