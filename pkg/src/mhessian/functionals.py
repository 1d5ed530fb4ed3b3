"""Energy, twisted functional, Rayleigh quotient and the semilinear functional.

    E_m(u)        = 1/(m+1) int (-u) (dd^c u)^m ^ beta^(n-m)
    I_m(u)        = 1/(m+1) int (-u)^(m+1) dmu
    Phi(u)        = E_m(u) - lam^m I_m(u)
    Phi_{G,mu}(u) = E_m(u) - int H(z, u(z)) dmu,   H(z,t) = int_t^0 G(z,s) ds

E_m is differentiable with E_m'(u) = -(dd^c u)^m ^ beta^(n-m); on radial
carriers the discrete energy is exactly the sum-by-parts partner of the
discrete Hessian density, so the identity holds to rounding error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.integrate import quad_vec

from mhessian.fields import DensityMeasure, GridPotential, RadialPotential, integrate
from mhessian.hessian import (
    ConeError,
    hessian_measure_density_unchecked,
    is_m_subharmonic,
)

CONE_TOL = 1e-8


def _values(u):
    return u.values if hasattr(u, "values") else np.asarray(u, dtype=float)


def _check_negative(u, tol=1e-12):
    v = _values(u)
    top = float(np.max(v))
    if top > tol * max(1.0, float(np.max(np.abs(v)))):
        raise ValueError(f"potential must be <= 0 (max value {top:.3e})")


def admissible_density(u, m: int, tol: float = CONE_TOL) -> np.ndarray:
    """Hessian density of u after checking sigma_k >= -tol * scale for k <= m."""
    dens = hessian_measure_density_unchecked(u, m)
    scale = float(np.max(np.abs(dens)))
    if isinstance(u, GridPotential):
        # second differences carry |u|/h^2 of rounding and iteration error
        scale = max(scale, (float(np.max(np.abs(u.values))) / float(np.min(u.carrier.h)) ** 2) ** m)
    report = is_m_subharmonic(u, m, tol * max(1.0, scale))
    if not report.passed:
        raise ConeError(
            f"potential is not {m}-subharmonic (sigma_{report.worst_k} = {report.min_sigma:.3e})",
            report,
        )
    return dens


def _integrate_beta(values, carrier) -> float:
    return float(np.sum(np.asarray(values) * carrier.weights))


def energy_Em(u, m: int, tol: float = CONE_TOL) -> float:
    _check_negative(u)
    dens = admissible_density(u, m, tol)
    return _integrate_beta(-u.values * dens, u.carrier) / (m + 1)


def twisted_Im(u, mu: DensityMeasure, m: int) -> float:
    if hasattr(u, "carrier") and not u.carrier.same_as(mu.carrier):
        raise ValueError("carrier mismatch")
    _check_negative(u)
    return integrate(np.maximum(-_values(u), 0.0) ** (m + 1), mu) / (m + 1)


def rayleigh_lambda(u, mu: DensityMeasure, m: int) -> float:
    """(E_m(u)/I_m(u))^(1/m); an upper bound for the first eigenvalue."""
    denom = twisted_Im(u, mu, m)
    if denom <= 0:
        raise ValueError("I_m(u) = 0: u vanishes mu-almost everywhere")
    return (energy_Em(u, m) / denom) ** (1.0 / m)


def phi_functional(u, mu: DensityMeasure, lam: float, m: int) -> float:
    return energy_Em(u, m) - lam**m * twisted_Im(u, mu, m)


def energy_gradient(u, m: int) -> np.ndarray:
    """Density field g with dE_m(u)[psi] = -int psi g dbeta^n."""
    return admissible_density(u, m)


def energy_directional_derivative(u, psi, m: int) -> float:
    g = energy_gradient(u, m)
    return _integrate_beta(-_values(psi) * g, u.carrier)


# ---------------------------------------------------------------------------
# right-hand-side families


@dataclass
class RhsFamily:
    """G(z,t) >= 0 for t <= 0 and its primitive H(z,t) = int_t^0 G(z,s) ds.

    ``G`` and ``H`` are called as ``G(x, t)`` where ``x`` is the carrier
    coordinate array (rho for radial carriers, z for grids) and ``t`` is a
    potential value array broadcastable against it.
    """

    kind: str
    G: Callable
    H: Callable
    lam: float = 0.0
    a: float = 0.0
    k: int = 0
    vanishes_at_zero: bool = False

    @classmethod
    def zero(cls) -> "RhsFamily":
        def z(x, t):
            return np.zeros_like(np.asarray(t, dtype=float))

        return cls("zero", z, z, vanishes_at_zero=True)

    @classmethod
    def eigen(cls, lam: float, m: int) -> "RhsFamily":
        return cls(
            "eigen",
            lambda x, t: (-lam * np.minimum(t, 0.0)) ** m,
            lambda x, t: lam**m * (-np.minimum(t, 0.0)) ** (m + 1) / (m + 1),
            lam=lam,
            k=m,
            vanishes_at_zero=True,
        )

    @classmethod
    def affine_m(cls, lam: float, m: int) -> "RhsFamily":
        """G = (1 - lam t)^m, with H normalized so that H(z, 0) = 0."""
        if lam < 0:
            raise ValueError("lam must be >= 0")

        def H(x, t):
            t = np.minimum(t, 0.0)
            if lam == 0:
                return -t
            return ((1.0 - lam * t) ** (m + 1) - 1.0) / (lam * (m + 1))

        return cls("affine_m", lambda x, t: (1.0 - lam * np.minimum(t, 0.0)) ** m, H, lam=lam, a=1.0, k=m)

    @classmethod
    def affine_k(cls, a: float, lam: float, k: int) -> "RhsFamily":
        """G = (a - lam t)^k, with H normalized so that H(z, 0) = 0."""
        if a < 0 or lam < 0:
            raise ValueError("a and lam must be >= 0")

        def H(x, t):
            t = np.minimum(t, 0.0)
            if lam == 0:
                return -t * a**k
            return ((a - lam * t) ** (k + 1) - a ** (k + 1)) / (lam * (k + 1))

        return cls(
            "affine_k",
            lambda x, t: (a - lam * np.minimum(t, 0.0)) ** k,
            H,
            lam=lam,
            a=a,
            k=k,
            vanishes_at_zero=(a == 0),
        )

    @classmethod
    def custom(cls, G: Callable, vanishes_at_zero: Optional[bool] = None) -> "RhsFamily":
        """H is obtained by adaptive quadrature of G on [t, 0]."""

        def H(x, t):
            tt = np.minimum(np.asarray(t, dtype=float), 0.0)
            # H = (-t) int_0^1 G(x, s t) ds
            val, _ = quad_vec(lambda s: G(x, s * tt), 0.0, 1.0, epsabs=1e-13, epsrel=1e-10)
            return -tt * val

        if vanishes_at_zero is None:
            vanishes_at_zero = False
        return cls("custom", G, H, vanishes_at_zero=vanishes_at_zero)

    def check_nonnegative(self, x, t_samples=None):
        if t_samples is None:
            t_samples = -np.concatenate(([0.0], 2.0 ** np.arange(-10, 11)))
        for t in t_samples:
            if np.any(np.asarray(self.G(x, t)) < 0):
                raise ValueError(f"G < 0 detected at t = {t}")


def _coords(u):
    c = u.carrier
    return c.rho if isinstance(u, RadialPotential) else c.z


def semilinear_functional(u, family: RhsFamily, mu: DensityMeasure, m: int) -> float:
    x = _coords(u)
    t = _values(u)
    g = np.asarray(family.G(x, t))
    if np.any(g[mu.carrier.weights > 0] < 0):
        raise ValueError("G < 0 detected at a sample point")
    return energy_Em(u, m) - integrate(np.broadcast_to(family.H(x, t), t.shape), mu)


# ---------------------------------------------------------------------------
# reports


@dataclass
class FunctionalReport:
    E_m: float
    I_m: float
    lambda_hat: float
    phi: float

    header = "E_m,I_m,lambda_hat,phi"

    def csv_row(self) -> str:
        return ",".join(f"{x:.17g}" for x in (self.E_m, self.I_m, self.lambda_hat, self.phi))


def functional_report(u, mu: DensityMeasure, m: int, lam: Optional[float] = None) -> FunctionalReport:
    E = energy_Em(u, m)
    Im = twisted_Im(u, mu, m)
    lam_hat = (E / Im) ** (1.0 / m) if Im > 0 else math.inf
    lam_used = lam_hat if lam is None else lam
    return FunctionalReport(E, Im, lam_hat, E - lam_used**m * Im)
