import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mhessian.fields import Domain, GridPotential, RadialPotential, lift_radial, make_grid, make_radial_grid
from mhessian.hessian import (
    ConeError,
    complex_hessian,
    cone_retract,
    elementary_symmetric,
    hessian_measure_density,
    in_cone,
    is_m_subharmonic,
    radial_hessian_measure,
    radial_sigma_flux_formula,
    radial_sigma_from_derivatives,
    sigma_k,
)


def sample(grid, fn):
    return GridPotential.from_function(grid, fn, dirichlet=False)


def sq(z):
    return np.sum(np.abs(z) ** 2, axis=0)


@pytest.fixture(scope="module")
def grid2():
    return make_grid(Domain.ball(2, 1.0), 9)


def test_hessian_of_norm_squared_is_identity(grid2):
    H = complex_hessian(sample(grid2, sq)).matrices
    assert np.allclose(H, np.eye(2), atol=1e-11)


def test_pluriharmonic_has_zero_hessian(grid2):
    H = complex_hessian(sample(grid2, lambda z: np.real(z[0] ** 2))).matrices
    assert np.allclose(H, 0, atol=1e-11)
    H = complex_hessian(sample(grid2, lambda z: np.real(z[0] * z[1]))).matrices
    assert np.allclose(H, 0, atol=1e-11)


def test_x1_squared(grid2):
    H = complex_hessian(sample(grid2, lambda z: np.real(z[0]) ** 2)).matrices
    expect = np.zeros((2, 2))
    expect[0, 0] = 0.5
    assert np.allclose(H, expect, atol=1e-11)


def test_mixed_term_recovered(grid2):
    # u = Re(z1 conj z2) has H_12 = 1/2, H_21 = 1/2
    H = complex_hessian(sample(grid2, lambda z: np.real(z[0] * np.conj(z[1])))).matrices
    assert np.allclose(H[:, 0, 1], 0.5, atol=1e-11)
    assert np.allclose(H[:, 1, 0], 0.5, atol=1e-11)


@given(coef=st.lists(st.floats(-2, 2), min_size=10, max_size=10))
@settings(max_examples=30, deadline=None)
def test_hermitian_and_quadratic_exact(coef):
    # random real quadratic form in (x1, y1, x2, y2)
    g = make_grid(Domain.box(2, 0.6), 5)
    A = np.zeros((4, 4))
    A[np.triu_indices(4)] = coef
    A = A + A.T

    def fn(z):
        x = np.stack([z[0].real, z[0].imag, z[1].real, z[1].imag])
        return 0.5 * np.einsum("a...,ab,b...->...", x, A, x)

    H = complex_hessian(sample(g, fn)).matrices
    assert np.array_equal(H, np.conj(np.transpose(H, (0, 2, 1))))
    # exact complex Hessian of the quadratic form
    J = np.array([[1, 1j, 0, 0], [0, 0, 1, 1j]]) / 2
    exact = np.conj(J) @ A @ J.T
    assert np.allclose(H, exact, atol=1e-9)


def test_sigma_k_examples():
    assert np.allclose(elementary_symmetric(np.array([[1.0, 1.0]]), 1), 2)
    assert np.allclose(elementary_symmetric(np.array([[1.0, 1.0]]), 2), 1)
    assert np.allclose(elementary_symmetric(np.array([[3.0, 1.0]]), 1), 4)
    assert np.allclose(elementary_symmetric(np.array([[3.0, 1.0]]), 2), 3)
    assert np.allclose(elementary_symmetric(np.zeros((1, 3)), 2), 0)
    assert np.allclose(elementary_symmetric(np.zeros((1, 3)), 0), 1)


def test_sigma_k_rejects_k_above_n(grid2):
    with pytest.raises(ValueError):
        sigma_k(complex_hessian(sample(grid2, sq)), 3)


@pytest.mark.parametrize("n", [1, 2])
def test_density_of_norm_squared_is_one(n):
    g = make_grid(Domain.ball(n, 1.0), 9)
    u = sample(g, sq)
    for m in range(1, n + 1):
        d = hessian_measure_density(u, m)
        assert np.allclose(d[g.interior], 1.0, atol=1e-10)


def test_density_m_out_of_range(grid2):
    with pytest.raises(ValueError):
        hessian_measure_density(sample(grid2, sq), 3)


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_radial_linear_profile_density_one(n):
    c = make_radial_grid(n, 201)
    v = RadialPotential(c, c.rho - 1)
    for m in range(1, n + 1):
        assert np.allclose(radial_hessian_measure(v, m), 1.0, atol=1e-10)


def dual_cell_average(c, k):
    """Exact average of rho^k over each dual cell w.r.t. d(rho^n)."""
    edges = np.concatenate(([0.0], c.mid, [c.rho1]))
    a, b = edges[:-1], edges[1:]
    n = c.n
    return n / (n + k) * (b ** (n + k) - a ** (n + k)) / (b**n - a**n)


def test_flux_formula_example_resolved():
    # v = rho^2 - 1, n = 2, m = 1: v' = 2 rho, v'' = 2, eigenvalues
    # (v', v' + rho v'') = (2 rho, 4 rho), so sigma_1 = 6 rho and the density is 3 rho
    rho = np.linspace(0.01, 1, 50)
    s1 = radial_sigma_from_derivatives(2 * rho, 2 * np.ones_like(rho), rho, 1, 2)
    assert np.allclose(s1, 6 * rho)
    assert np.allclose(radial_sigma_flux_formula(2 * rho, 2 * np.ones_like(rho), rho, 1, 2), 6 * rho)
    c = make_radial_grid(2, 101)
    d = radial_hessian_measure(RadialPotential(c, c.rho**2 - 1), 1)
    assert np.allclose(d[:-1], 3 * dual_cell_average(c, 1)[:-1], rtol=1e-10)


def test_radial_rho_squared_n2_m2():
    # eigenvalues (2 rho, 4 rho): sigma_2 = 8 rho^2, C(2,2) = 1
    rho = np.linspace(0.0, 1, 50)
    s2 = radial_sigma_from_derivatives(2 * rho, 2 * np.ones_like(rho), rho, 2, 2)
    assert np.allclose(s2, 8 * rho**2)
    c = make_radial_grid(2, 201)
    d = radial_hessian_measure(RadialPotential(c, c.rho**2), 2)
    # the discrete flux scheme is exact for cell averages up to O(h^2) in rho^2
    avg = 8 * dual_cell_average(c, 2)
    assert np.allclose(d[:-1], avg[:-1], rtol=1e-3, atol=1e-6)


def test_radial_zero_profile():
    c = make_radial_grid(3, 51)
    assert np.all(radial_hessian_measure(RadialPotential(c, np.zeros(51)), 2) == 0)


def test_radial_rejects_non_subharmonic():
    c = make_radial_grid(2, 51)
    with pytest.raises(ConeError, match="not m-subharmonic"):
        radial_hessian_measure(RadialPotential(c, -c.rho), 1)


@given(
    n=st.integers(1, 4),
    coef=st.lists(st.floats(0, 3), min_size=2, max_size=5),
    rho=st.floats(0.01, 2.0),
)
@settings(max_examples=100, deadline=None)
def test_flux_formula_matches_eigenvalues(n, coef, rho):
    p = np.polynomial.Polynomial(coef)
    dv, d2v = p.deriv(1)(rho), p.deriv(2)(rho)
    for m in range(1, n + 1):
        a = radial_sigma_from_derivatives(dv, d2v, rho, m, n)
        b = radial_sigma_flux_formula(dv, d2v, rho, m, n)
        assert a == pytest.approx(b, rel=1e-9, abs=1e-12)


def test_cone_report_examples():
    g = make_grid(Domain.ball(2, 1.0), 9)
    rep = is_m_subharmonic(sample(g, sq), 2)
    assert rep.passed and rep.min_sigma == pytest.approx(1.0)
    rep = is_m_subharmonic(sample(g, lambda z: -sq(z)), 1)
    assert not rep.passed and rep.min_sigma < 0
    rep = is_m_subharmonic(sample(g, lambda z: np.real(z[0] ** 2)), 2)
    assert rep.passed and abs(rep.min_sigma) < 1e-10


def test_cone_retract_examples():
    assert np.allclose(cone_retract(np.array([2.0, 1.0]), 2), [2.0, 1.0])
    assert np.allclose(cone_retract(np.array([-2.0]), 1), [0.0], atol=1e-11)
    assert np.allclose(cone_retract(np.array([-1.0, -1.0]), 1), [0.0, 0.0], atol=1e-11)


@given(lam=st.lists(st.floats(-50, 50), min_size=1, max_size=4), data=st.data())
@settings(max_examples=100, deadline=None)
def test_cone_retract_properties(lam, data):
    lam = np.array(lam)
    m = data.draw(st.integers(1, len(lam)))
    out = cone_retract(lam, m)
    t = out[0] - lam[0]
    assert t >= 0
    assert np.allclose(out - lam, t)
    assert in_cone(out, m, tol=1e-8 * max(1.0, float(np.max(np.abs(out)))) ** len(lam))
    again = cone_retract(out, m)
    assert np.allclose(again, out, atol=1e-9 * max(1.0, float(np.max(np.abs(lam)))))


def test_radial_grid_consistency_n2():
    c = make_radial_grid(2, 2001)
    v = RadialPotential(c, c.rho**2 - 1)
    g = make_grid(Domain.ball(2, 1.0), 13)
    u = lift_radial(v, g)
    dg = hessian_measure_density(u, 1)
    # away from the origin and the boundary collar
    sel = g.interior & (g.rho > 0.2) & (g.rho < 0.6)
    exact = 3 * g.rho[sel]
    assert np.max(np.abs(dg[sel] - exact) / exact) < 0.10
