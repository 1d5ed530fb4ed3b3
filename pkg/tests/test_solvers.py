import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mhessian.fields import Domain, beta_measure, lift_radial, make_density_measure, make_grid, make_radial_grid
from mhessian.functionals import RhsFamily, energy_Em, rayleigh_lambda, twisted_Im
from mhessian.hessian import hessian_measure_density, radial_hessian_measure
from mhessian.solvers import (
    DivergenceError,
    HypothesisError,
    check_H_hypotheses,
    compute_exponents,
    dirichlet_solve_grid,
    dirichlet_solve_radial,
    eigen_inverse_iteration,
    eigen_rayleigh_descent,
    holder_condition,
    p_star,
    solve_semilinear,
)

from oracles import DISC_LAMBDA

NM = [(1, 1), (2, 1), (2, 2), (3, 1), (3, 2), (3, 3)]


# ---------------------------------------------------------------------------
# Dirichlet


@pytest.mark.parametrize("n,m", NM)
def test_radial_unit_density_gives_quadratic(n, m):
    c = make_radial_grid(n, 301)
    u = dirichlet_solve_radial(1.0, m, c)
    assert np.allclose(u.values, c.rho - 1, atol=1e-12)


def test_radial_zero_and_negative():
    c = make_radial_grid(2, 51)
    assert np.all(dirichlet_solve_radial(0.0, 2, c).values == 0)
    with pytest.raises(ValueError):
        dirichlet_solve_radial(-np.ones(51), 1, c)


@given(seed=st.integers(0, 10_000))
@settings(max_examples=25, deadline=None)
def test_radial_round_trip(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 5))
    m = int(rng.integers(1, n + 1))
    c = make_radial_grid(n, 2001)
    a = rng.uniform(0.1, 2.0, 3)
    f = a[0] + a[1] * c.rho + a[2] * np.sin(3 * c.rho) ** 2
    back = radial_hessian_measure(dirichlet_solve_radial(f, m, c), m)
    sel = c.interior
    assert np.max(np.abs(back - f)[sel] / f[sel]) < 1e-4


def test_grid_disc_quadratic():
    g = make_grid(Domain.ball(1, 1.0), 33)
    u = dirichlet_solve_grid(1.0, 1, g)
    assert np.max(np.abs(u.values - (g.rho - 1))[g.interior]) < 1e-10


def test_grid_n2_m1_against_radial():
    c = make_radial_grid(2, 2001)
    ref = dirichlet_solve_radial(c.rho, 1, c)
    g = make_grid(Domain.ball(2, 1.0), 17)
    u = dirichlet_solve_grid(g.rho, 1, g)
    ex = lift_radial(ref, g)
    sel = g.interior
    assert np.max(np.abs(u.values - ex.values)[sel]) <= 0.05 * np.max(np.abs(ex.values))


def test_grid_n2_m2_quadratic():
    g = make_grid(Domain.ball(2, 1.0), 13)
    u, info = dirichlet_solve_grid(1.0, 2, g, full_output=True)
    assert info.converged
    assert np.max(np.abs(u.values - (g.rho - 1))[g.interior]) <= 0.10


def test_grid_n2_m2_nonuniform_converges():
    g = make_grid(Domain.ball(2, 1.0), 9)
    f = 0.5 + g.rho
    u, info = dirichlet_solve_grid(f, 2, g, full_output=True)
    assert info.converged and info.residual < 1e-6
    d = hessian_measure_density(u, 2)
    assert np.allclose(d[g.interior], f[g.interior], rtol=1e-6)


def test_grid_rejects_bad_input():
    g = make_grid(Domain.ball(1, 1.0), 9)
    with pytest.raises(ValueError):
        dirichlet_solve_grid(-g.rho - 0.1, 1, g)
    with pytest.raises(ValueError):
        dirichlet_solve_grid(1.0, 2, g)


def test_divergence_detector():
    g = make_grid(Domain.ball(2, 1.0), 9)
    with pytest.raises(DivergenceError, match="residual grew"):
        dirichlet_solve_grid(0.5 + g.rho, 2, g, omega=2.5, max_sweeps=2000)


# ---------------------------------------------------------------------------
# eigenvalues


@pytest.fixture(scope="module")
def disc_radial():
    c = make_radial_grid(1, 4001)
    mu = beta_measure(c)
    return mu, eigen_inverse_iteration(mu, 1)


def test_radial_disc_against_bessel(disc_radial):
    _, res = disc_radial
    assert res.converged
    assert res.lam == pytest.approx(DISC_LAMBDA, rel=1e-5)


@pytest.mark.parametrize("n,m", NM)
def test_eigen_invariants(n, m):
    c = make_radial_grid(n, 1001)
    mu = beta_measure(c)
    res = eigen_inverse_iteration(mu, m)
    u = res.eigenfunction
    assert res.converged and res.residual_l1 < 1e-6
    assert np.all(u.values <= 0) and u.values[-1] == 0
    radial_hessian_measure(u, m)
    assert twisted_Im(u, mu, m) == pytest.approx(1.0, rel=1e-12)
    E = energy_Em(u, m)
    assert abs(res.lam**m * twisted_Im(u, mu, m) - E) <= 1e-8 * E
    assert res.lam_normalization == pytest.approx(res.lam, rel=1e-6)
    assert min(res.rayleigh_history) >= res.lam * (1 - 1e-10)


def test_eigen_n2_m2_history_tail():
    c = make_radial_grid(2, 2001)
    res = eigen_inverse_iteration(beta_measure(c), 2)
    assert res.residual_l1 < 1e-6
    assert abs(res.rayleigh_history[-2] - res.lam) <= 1e-6 * res.lam


@pytest.mark.parametrize("n,m", [(1, 1), (2, 2), (3, 1)])
def test_dilation_law(n, m):
    lams = {}
    for s in (0.5, 1.0, 2.0):
        c = make_radial_grid(n, 1001, radius=s)
        lams[s] = eigen_inverse_iteration(beta_measure(c), m).lam
    assert lams[0.5] == pytest.approx(4 * lams[1.0], rel=5e-3)
    assert lams[2.0] == pytest.approx(lams[1.0] / 4, rel=5e-3)


@pytest.mark.parametrize("scale", [1e-3, 0.7, 50.0])
def test_normalization_invariance(scale):
    c = make_radial_grid(2, 801)
    mu = beta_measure(c)
    base = eigen_inverse_iteration(mu, 2).lam
    init = dirichlet_solve_radial(1.0 + c.rho, 2, c).scaled(scale)
    assert eigen_inverse_iteration(mu, 2, init=init).lam == pytest.approx(base, rel=1e-8)


def test_eigen_rejects_bad_init():
    c = make_radial_grid(1, 101)
    with pytest.raises(ValueError):
        eigen_inverse_iteration(beta_measure(c), 1, init=dirichlet_solve_radial(0.0, 1, c))


def test_variational_upper_bound(disc_radial):
    mu, res = disc_radial
    rng = np.random.default_rng(11)
    c = mu.carrier
    u = res.eigenfunction
    for _ in range(20):
        bump = rng.uniform(0.05, 0.5) * dirichlet_solve_radial(rng.uniform(0, 2, c.points), 1, c).values
        w = u.with_values(u.values + bump)
        assert rayleigh_lambda(w, mu, 1) >= res.lam * (1 - 1e-12)


def test_descent_agrees_with_inverse_iteration(disc_radial):
    mu, res = disc_radial
    c = mu.carrier
    init = dirichlet_solve_radial(1.0 + 3 * c.rho, 1, c)
    d = eigen_rayleigh_descent(mu, 1, init=init, steps=300)
    assert d.lam == pytest.approx(res.lam, rel=1e-4)
    h = np.asarray(d.rayleigh_history)
    assert np.all(np.diff(h) <= 1e-10 * h[0])


def test_descent_stationary_at_eigenfunction(disc_radial):
    mu, res = disc_radial
    d = eigen_rayleigh_descent(mu, 1, init=res.eigenfunction, steps=5)
    h = np.asarray(d.rayleigh_history)
    assert np.all(np.abs(np.diff(h)) < 1e-8)


def test_descent_n2_m2_monotone():
    c = make_radial_grid(2, 801)
    mu = beta_measure(c)
    ref = eigen_inverse_iteration(mu, 2).lam
    d = eigen_rayleigh_descent(mu, 2, steps=200)
    h = np.asarray(d.rayleigh_history)
    assert np.all(np.diff(h) <= 1e-10 * h[0])
    assert d.lam == pytest.approx(ref, rel=1e-4)


def test_eigen_runlog_columns(disc_radial):
    _, res = disc_radial
    text = res.log.to_csv()
    assert text.splitlines()[0] == "iteration,value,functional,wall_time"
    assert len(text.splitlines()) == len(res.rayleigh_history) + 1


def test_grid_disc_eigenvalue_trend():
    errs = []
    for N in (17, 33, 65):
        g = make_grid(Domain.ball(1, 1.0), N)
        lam = eigen_inverse_iteration(beta_measure(g), 1).lam
        errs.append(abs(lam - DISC_LAMBDA))
    # second-order trend measured over two halvings
    assert errs[0] / errs[2] >= 9
    assert errs[2] / DISC_LAMBDA < 1e-2


# ---------------------------------------------------------------------------
# semilinear


def test_H_checks():
    lam1 = 1.5
    assert check_H_hypotheses(RhsFamily.affine_m(0.5 * lam1, 2), lam1, 2).h2_status == "pass"
    assert check_H_hypotheses(RhsFamily.affine_m(1.5 * lam1, 2), lam1, 2).h2_status == "fail"
    for lam in (0.1, 5.0, 100.0):
        assert check_H_hypotheses(RhsFamily.affine_k(1.0, lam, 1), lam1, 2).h2_status == "pass"
    rep = check_H_hypotheses(RhsFamily.eigen(2 * lam1, 2), lam1, 2)
    assert rep.h3_status == "pass"
    with pytest.raises(ValueError):
        check_H_hypotheses(RhsFamily.zero(), 0.0, 2)


@pytest.fixture(scope="module")
def n2():
    c = make_radial_grid(2, 1001)
    mu = beta_measure(c)
    return c, mu, eigen_inverse_iteration(mu, 2).lam


def test_semilinear_zero_family(n2):
    c, mu, lam1 = n2
    res = solve_semilinear(RhsFamily.zero(), mu, 2, lam1=lam1)
    assert res.converged and np.all(res.potential.values == 0)


def test_semilinear_plain_dirichlet(n2):
    c, mu, lam1 = n2
    res = solve_semilinear(RhsFamily.affine_m(0.0, 2), mu, 2, lam1=lam1)
    assert res.converged
    assert np.allclose(res.potential.values, c.rho - 1, atol=1e-12)


def test_semilinear_affine_k(n2):
    c, mu, lam1 = n2
    res = solve_semilinear(RhsFamily.affine_k(1.0, 1.0, 1), mu, 2, lam1=lam1)
    assert res.converged and res.residual < 1e-6
    assert np.all(res.potential.values[:-1] < 0)
    assert res.phi_monotone


def test_semilinear_below_lambda1(n2):
    c, mu, lam1 = n2
    res = solve_semilinear(RhsFamily.affine_m(0.8 * lam1, 2), mu, 2, lam1=lam1)
    assert res.converged and res.residual < 1e-6 and res.phi_monotone
    u = res.potential
    # one more solve is a fixed point
    G = RhsFamily.affine_m(0.8 * lam1, 2).G(c.rho, u.values)
    again = dirichlet_solve_radial(G * mu.density, 2, c)
    assert np.max(np.abs(again.values - u.values)) <= 1e-8


def test_semilinear_refuses_above_lambda1(n2):
    c, mu, lam1 = n2
    with pytest.raises(HypothesisError, match="H2"):
        solve_semilinear(RhsFamily.affine_m(1.2 * lam1, 2), mu, 2, lam1=lam1)


def test_semilinear_lebesgue_density():
    c = make_radial_grid(1, 1001)
    mu = make_density_measure(c, 1.0 + c.rho, reference="lebesgue")
    res = solve_semilinear(RhsFamily.affine_m(0.0, 1), mu, 1, lam1=1.0)
    back = radial_hessian_measure(res.potential, 1)
    assert np.allclose(back[c.interior], mu.density[c.interior], rtol=1e-9)


# ---------------------------------------------------------------------------
# exponents


def test_exponent_examples():
    r = compute_exponents(2, 3, 5.0)
    assert r.ell == 3 and r.p_star == pytest.approx(3.0)
    assert r.holder_condition
    assert not compute_exponents(2, 3, 2.5).holder_condition
    r = compute_exponents(1, 2, 4.0)
    assert r.k_exp == pytest.approx(1.5)
    assert r.tau(1.0) == pytest.approx(4 / 3)
    r = compute_exponents(3, 3, 2.0)
    assert r.limit_case and r.p_star == 1 and math.isinf(r.ell) and math.isinf(r.k_exp)


def test_exponent_errors():
    with pytest.raises(ValueError, match="m exceeds n"):
        compute_exponents(3, 2, 2.0)
    with pytest.raises(ValueError):
        compute_exponents(1, 2, 1.0)
    with pytest.raises(ValueError):
        compute_exponents(1, 2, 3.0).tau(3.0)


@pytest.mark.parametrize("n", range(1, 7))
def test_holder_truth_table(n):
    for m in range(1, n + 1):
        for p in (1.5, 3.0, 10.0, 100.0):
            ps = p_star(m, n)
            expect = (n - 1) / 2 < m <= n and p > ps
            assert holder_condition(m, n, p) == expect
            if m < n and (m + 1) / (n - m) > 1:
                ell = (m + 1) / (n - m)
                delta = ell**2 * (n - m) ** 2 + 4 * ell * m * n
                assert ps == pytest.approx((ell * (n + m) + math.sqrt(delta)) / (2 * m * (ell - 1)))


def test_p_star_limit():
    # p* -> 1 as m -> n is reproduced at the endpoint
    assert p_star(4, 4) == 1.0
    assert math.isnan(p_star(1, 4))
