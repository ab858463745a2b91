import math

import numpy as np
import pytest

from multibath import ou_exact as ou
from multibath import stationary as st
from multibath.potential import FunctionPotential, Quadratic


def quartic():
    f = lambda a, b: a[..., 0] ** 4 / 4 + a[..., 0] ** 2 * b[..., 0] ** 2 + b[..., 0] ** 2 / 2
    return FunctionPotential(f, 1, 1)


def test_quadrature_spec_validation():
    with pytest.raises(st.QuadratureError):
        st.QuadratureSpec(nodes=4)
    with pytest.raises(st.QuadratureError):
        st.QuadratureSpec(rule="simpson")
    assert st.QuadratureSpec(nodes=32).refined().nodes == 64


def test_z1_gaussian_integral(p0):
    q = st.auto_spec(p0, 1.0, 2.0)
    assert st.z1(p0, 1.0, 0.0, q) == pytest.approx(math.sqrt(math.pi), rel=1e-12)


def test_z1_decreases_with_beta():
    p = quartic()
    q = st.QuadratureSpec(6, 6, 64)
    x2 = np.linspace(-2, 2, 9)
    assert np.all(st.z1(p, 2.0, x2, q) < st.z1(p, 1.0, x2, q))


def test_z1_self_convergence():
    p = quartic()
    q = st.QuadratureSpec(6, 6, 64)
    x2 = np.array([0.0, 0.5, 1.0])
    np.testing.assert_allclose(st.z1(p, 1.0, x2, q), st.z1(p, 1.0, x2, q.refined()), rtol=0, atol=1e-8)


def test_effective_potential_slope(p0):
    q = st.auto_spec(p0, 1.0, 2.0)
    F = st.effective_potential(p0, 1.0, np.array([0.0, 1.0]), q)
    assert F[1] - F[0] == pytest.approx(0.4375, abs=1e-10)


def test_effective_potential_decoupled():
    p = Quadratic(2.0, 3.0, 0.0)
    q = st.auto_spec(p, 1.0, 1.0)
    y = np.linspace(-2, 2, 5)
    for b1 in (0.5, 1.0, 3.0):
        F = st.effective_potential(p, b1, y, q)
        np.testing.assert_allclose(F - F[2], 1.5 * y * y, atol=1e-10)


def test_effective_force_is_conditional_average():
    p = quartic()
    q = st.QuadratureSpec(6, 6, 96)
    tabs = st.rho_star(p, 1.0, 1.0, q)
    y = np.array([0.3, 0.8, 1.5])
    h = 1e-5
    dF = (st.effective_potential(p, 1.0, y + h, q) - st.effective_potential(p, 1.0, y - h, q)) / (2 * h)
    avg = tabs.conditional_expectation(lambda a, b: 2 * a[..., 0] ** 2 * b[..., 0] + b[..., 0], y)
    np.testing.assert_allclose(dF, avg, rtol=1e-6)


def test_rho_star_gaussian_covariance(p0, sigma_p0):
    tabs = st.rho_star(p0, 1.0, 2.0)
    np.testing.assert_allclose(tabs.covariance(), sigma_p0, atol=1e-6)
    np.testing.assert_allclose(tabs.mean(), 0.0, atol=1e-12)
    assert tabs.normalization() == pytest.approx(1.0, abs=1e-10)
    assert max(tabs.meta["tail_z1"], tabs.meta["tail_z2"]) < 1e-8


def test_conditional_is_normalized(p0):
    tabs = st.rho_star(p0, 1.0, 2.0)
    for y in (-2.0, 0.0, 1.3):
        assert tabs.conditional_expectation(lambda a, b: np.ones(a.shape[:-1]), y)[0] == pytest.approx(1.0, abs=1e-8)


def test_equal_temperatures_give_gibbs(p0):
    tabs = st.rho_star(p0, 1.5, 1.5)
    x = np.linspace(-2, 2, 7)
    X, Y = np.meshgrid(x, x)
    Z = 2 * math.pi / math.sqrt(np.linalg.det(1.5 * p0.A))
    gibbs = np.exp(-1.5 * p0.eval(X[..., None], Y[..., None])) / Z
    np.testing.assert_allclose(tabs.joint(X, Y), gibbs, atol=1e-8)


def test_marginal_is_gibbs_of_effective_potential():
    p = quartic()
    tabs = st.rho_star(p, 1.0, 2.0, st.QuadratureSpec(6, 6, 96))
    d = np.log(tabs.rho2) + 2.0 * tabs.F
    assert np.ptp(d) < 1e-8


def test_rows_layout(p0):
    rows = st.rho_star(p0, 1.0, 2.0, st.QuadratureSpec(6, 6, 32)).to_rows()
    assert len(rows) == 32 and len(rows[0]) == 4


def test_high_dimension_rejected():
    with pytest.raises(st.QuadratureError):
        st.tensor_grid(8, 1.0, 0.0, "gauss", 3)


def test_free_energy_at_reference_is_zero(p0):
    ref = ou.gaussian_stationary(p0.params, 1.0, 2.0)
    r = st.free_energy_functional(ref, p0, 1.0, 2.0)
    assert abs(r.difference) < 1e-14


def test_free_energy_matches_kl_decomposition(p0):
    s = ou.build(p0.params, 1.0, 2.0, 100.0)
    for t in (0.3, 3.0, 300.0):
        r = st.free_energy_functional(ou.law_at(s, t, 1.0, 1.0), p0, 1.0, 2.0)
        assert r.difference == pytest.approx(r.decomposition, abs=1e-8)


def test_grid_free_energy_matches_kl_decomposition(p0):
    g = ou.law_at(ou.build(p0.params, 1.0, 2.0, 100.0), 3.0, 1.0, 1.0)
    x, w = st._rule_1d(200, 8.0, 0.0, "gauss")
    d = st.GridDensity.from_function(g.pdf, x, x, w, w)
    r = st.free_energy_functional(d, p0, 1.0, 2.0)
    assert r.difference == pytest.approx(r.decomposition, abs=1e-8)
    exact = st.free_energy_functional(g, p0, 1.0, 2.0)
    assert r.difference == pytest.approx(exact.difference, abs=1e-6)


def test_gibbs_free_energy_gap_vanishes(p0):
    S = np.linalg.inv(1.2 * p0.A)
    r = st.free_energy_functional(ou.GaussianMeasure(np.zeros(2), S), p0, 1.2, 1.2)
    assert abs(r.difference) < 1e-13
