import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate, linalg

from multibath import ou_exact as ou
from multibath.potential import QuadraticParams

valid_quadratics = st.tuples(st.floats(0.3, 4.0), st.floats(0.3, 4.0), st.floats(-0.95, 0.95)).map(
    lambda t: QuadraticParams(t[0], t[1], t[2] * math.sqrt(t[0] * t[1])))


def test_eigenvalues_p0(p0_system):
    s = p0_system(100)
    assert s.gamma1 == pytest.approx(2.0012554893, abs=1e-9)
    assert s.gamma2 == pytest.approx(0.0087445107, abs=1e-9)
    ev = np.sort(np.linalg.eigvals(s.Gamma).real)[::-1]
    np.testing.assert_allclose([s.gamma1, s.gamma2], ev, rtol=1e-12)


def test_eigenvalue_expansion_constants(p0_system):
    c1, c2 = [], []
    for lam in (1e2, 1e3, 1e4):
        s = p0_system(lam)
        c1.append(abs(s.gamma1 - 2.0) * lam)
        c2.append(abs(s.gamma2 - 1.75 / (2.0 * lam)) * lam ** 2)
    # fitted constants settle as lam grows
    assert abs(c1[2] - c1[1]) < 0.02 * c1[2] and abs(c2[2] - c2[1]) < 0.02 * c2[2]


def test_decoupled_branch():
    s = ou.build(QuadraticParams(2.0, 1.0, 0.0), 1.0, 2.0, 10.0)
    assert s.branch == "decoupled"
    assert (s.gamma1, s.gamma2) == (2.0, 0.1)
    np.testing.assert_allclose(s.Sigma, np.diag([0.5, 0.5]))


def test_degenerate_branch_matches_quadrature():
    s = ou.build(QuadraticParams(1.0, 1.0, 1e-12), 1.0, 2.0, 1.0)
    assert s.branch == "degenerate"
    for t in (0.1, 1.0, 10.0):
        np.testing.assert_allclose(ou.covariance_at(s, t), ou.covariance_quadrature(s, t), atol=1e-10)
        np.testing.assert_allclose(ou.expm_neg(s, t), linalg.expm(-t * s.Gamma), atol=1e-12)


def test_mean_limits(p0_system):
    s = p0_system(100)
    np.testing.assert_array_equal(ou.mean_at(s, 0.0, 1.0, 1.0), [1.0, 1.0])
    assert np.max(np.abs(ou.mean_at(s, 50 / s.gamma2, 1.0, 1.0))) < 1e-10


def test_slow_mean_tracks_slow_exponential(p0_system):
    # mu2(t) = y0 e^{-gamma2 t} + O(1/lam)
    gaps = []
    for lam in (100.0, 200.0):
        s = p0_system(lam)
        ts = np.linspace(0, 5 / s.gamma2, 60)
        gaps.append(max(abs(ou.mean_at(s, t, 1.0, 1.0)[1] - math.exp(-s.gamma2 * t)) for t in ts))
    assert gaps[0] < 2 / 100 and 0.4 < gaps[1] / gaps[0] < 0.6


def test_covariance_limits(p0_system):
    s = p0_system(100)
    np.testing.assert_array_equal(ou.covariance_at(s, 0.0), np.zeros((2, 2)))
    np.testing.assert_allclose(ou.covariance_at(s, 50 / s.gamma2), s.Sigma_inf, atol=1e-12)


def test_finite_lambda_stationary_covariance_solves_lyapunov(p0_system):
    s = p0_system(100)
    S = s.Sigma_inf
    np.testing.assert_allclose(s.Gamma @ S + S @ s.Gamma.T, s.D, atol=1e-14)


def test_finite_lambda_covariance_differs_from_limit_at_order_one_over_lambda(p0_system):
    # Sigma is the lam -> infinity law; the OU process at finite lam relaxes to Sigma_inf
    gaps = [np.max(np.abs(p0_system(lam).Sigma_inf - p0_system(lam).Sigma)) for lam in (100, 200, 400)]
    assert 5e-4 < gaps[0] < 1e-2
    assert 0.45 < gaps[1] / gaps[0] < 0.55 and 0.45 < gaps[2] / gaps[1] < 0.55


def test_quadrature_self_convergence(p0_system):
    s = p0_system(100)
    assert np.all(ou.covariance_quadrature(s, 0.0) == 0)
    for t in (0.5, 5.0, 500.0):
        a, b = ou.covariance_quadrature(s, t), ou.covariance_quadrature(s, t, n_nodes=48)
        assert np.max(np.abs(a - b)) < 1e-10
    np.testing.assert_allclose(ou.covariance_at(s, 1.0), ou.covariance_quadrature(s, 1.0), atol=1e-8)


@given(valid_quadratics, st.sampled_from([1.0, 10.0, 100.0]), st.sampled_from([0.01, 0.1, 1.0, 10.0, 100.0]))
def test_closed_form_matches_quadrature(q, lam, t):
    s = ou.build(q, 1.0, 2.0, lam)
    Om = ou.covariance_at(s, t)
    assert np.max(np.abs(Om - ou.covariance_quadrature(s, t))) / (1 + np.max(np.abs(Om))) < 1e-8


@given(valid_quadratics, st.floats(0.2, 5.0), st.floats(0.2, 5.0))
def test_stationary_block_structure(q, b1, b2):
    S = ou.gaussian_stationary(q, b1, b2).cov
    cm = ou.conditional_marginal(ou.GaussianMeasure(np.zeros(2), S))
    assert cm.condVar == pytest.approx(1 / (b1 * q.a), rel=1e-10)
    assert cm.condSlope == pytest.approx(-q.c / q.a, rel=1e-10)
    assert cm.margVar == pytest.approx(q.a / (b2 * q.det), rel=1e-10)


def test_stationary_special_cases(sigma_p0):
    np.testing.assert_allclose(ou.gaussian_stationary(QuadraticParams(2, 1, 0.5), 1, 2).cov, sigma_p0, atol=1e-15)
    np.testing.assert_allclose(ou.gaussian_stationary(QuadraticParams(2, 3, 0), 1, 2).cov, np.diag([0.5, 1 / 6]))
    q = QuadraticParams(2, 1, 0.5)
    np.testing.assert_allclose(ou.gaussian_stationary(q, 1.5, 1.5).cov, np.linalg.inv(1.5 * q.matrix), atol=1e-14)


def test_conditional_marginal_values(sigma_p0, p0_system):
    cm = ou.conditional_marginal(ou.GaussianMeasure(np.zeros(2), np.eye(2)))
    assert (cm.condSlope, cm.condVar) == (0.0, 1.0)
    assert ou.conditional_marginal(ou.GaussianMeasure(np.zeros(2), sigma_p0)).condVar == pytest.approx(0.5)
    s = p0_system(1e4)
    cm = ou.conditional_marginal(ou.law_at(s, 50 / s.gamma2, 1, 1))
    assert cm.condVar == pytest.approx(0.5, abs=1e-3)
    assert cm.margVar == pytest.approx(4 / 7, abs=1e-3)


def test_kl_1d_values():
    assert ou.kl_1d_gaussian(0.3, 2.0, 0.3, 2.0) == 0.0
    assert ou.kl_1d_gaussian(1, 1, 0, 1) == pytest.approx(0.5)
    assert ou.kl_1d_gaussian(0, 2, 0, 1) == pytest.approx(0.153426, abs=1e-6)
    p1 = lambda x: math.exp(-x * x / 4) / math.sqrt(4 * math.pi)
    p2 = lambda x: math.exp(-x * x / 2) / math.sqrt(2 * math.pi)
    num = integrate.quad(lambda x: p1(x) * math.log(p1(x) / p2(x)), -30, 30)[0]
    assert ou.kl_1d_gaussian(0, 2, 0, 1) == pytest.approx(num, rel=1e-10)


def test_kl_zero_at_reference(p0_system):
    s = p0_system(100)
    D1, D2 = ou.kl_decomposition(ou.GaussianMeasure(np.zeros(2), s.Sigma), ou.GaussianMeasure(np.zeros(2), s.Sigma))
    assert abs(D1) < 1e-15 and abs(D2) < 1e-15


@given(valid_quadratics, st.floats(0.01, 500.0))
def test_kl_chain_rule(q, t):
    s = ou.build(q, 1.0, 2.0, 50.0)
    g = ou.law_at(s, t, 1.0, -0.5)
    ref = ou.GaussianMeasure(np.zeros(2), s.Sigma)
    D1, D2 = ou.kl_decomposition(g, ref)
    assert D1 + D2 == pytest.approx(ou.kl_gaussian(g, ref), abs=1e-10, rel=1e-10)
    assert D1 >= -1e-14 and D2 >= -1e-14


def test_kl_trajectory_rejects_time_zero(p0_system):
    with pytest.raises(ValueError):
        ou.kl_trajectories(p0_system(100), 1, 1, [0.0])


def test_large_lambda_leading_forms(p0_system):
    s = p0_system(1e4)
    lead = ou.large_lambda_expansion(s, 0.0)
    assert lead["Omega_leading"][1, 1] == 0.0
    lead = ou.large_lambda_expansion(s, 1e9)
    np.testing.assert_allclose(lead["Omega_leading"], s.Sigma, atol=1e-15)
    np.testing.assert_allclose(lead["mu_leading"], 0.0, atol=1e-15)


def test_expansion_gap_scales_like_one_over_lambda(p0_system):
    Cs = []
    for lam in (100.0, 200.0, 400.0):
        s = p0_system(lam)
        ts = np.linspace(0, 5 / s.gamma2, 50)
        gap = max(np.max(np.abs(ou.covariance_at(s, t) - ou.large_lambda_expansion(s, t)["Omega_leading"]))
                  for t in ts)
        Cs.append(gap * lam)
    assert max(Cs) / min(Cs) < 1.1


def test_leading_order_kl_mean_coefficient(p0_system):
    # the fast mean relaxes to -(c/a) y0, so the D1 amplitude involves (x0 + (c/a) y0)^2
    s = p0_system(1e4)
    t = 2 / s.gamma1
    exact = ou.kl_trajectories(s, 1.0, 1.0, [t]).D1[0]
    assert abs(exact - ou.kl_leading_order(s, t, 1.0, 1.0)[0]) < 10 / 1e4
    E = math.exp(-4)
    swapped = 0.5 * (-math.log(1 - E) - E + E * 1.0 * 2.0 * (1.0 + (2.0 / 0.5) * 1.0) ** 2)
    assert abs(exact - swapped) > 0.1


def _grad_log_gauss(g, z):
    return -(z - g.mean) @ np.linalg.inv(g.cov).T


def test_entropy_dissipation_identity(p0_system):
    s = p0_system(20.0)
    ref = ou.GaussianMeasure(np.zeros(2), s.Sigma)
    A = np.array([[s.a, s.c], [s.c, s.b]])
    Linv = np.diag([1.0, 1 / s.lam])
    binv = np.diag([1 / s.beta1, 1 / s.beta2])
    xh, wh = np.polynomial.hermite_e.hermegauss(20)
    for t in (0.3, 2.0, 40.0):
        g = ou.law_at(s, t, 1.0, 1.0)
        Lc = np.linalg.cholesky(g.cov)
        Z = np.stack(np.meshgrid(xh, xh, indexing="ij"), -1).reshape(-1, 2)
        W = np.outer(wh, wh).ravel() / (2 * math.pi)
        X = g.mean + Z @ Lc.T
        flux = (_grad_log_gauss(g, X) @ binv + X @ A) @ Linv
        rate = -np.sum(W * np.sum(flux * (_grad_log_gauss(g, X) - _grad_log_gauss(ref, X)), -1))
        h = 1e-4 * max(t, 1.0)
        Dp, Dm = ou.kl_trajectories(s, 1, 1, [t + h, t - h]).D
        fd = (Dp - Dm) / (2 * h)
        assert rate == pytest.approx(fd, rel=1e-3)


def test_pinsker_numerical_tv(p0_system):
    s = p0_system(10.0)
    ref = ou.GaussianMeasure(np.zeros(2), s.Sigma)
    x = np.linspace(-8, 8, 801)
    X, Y = np.meshgrid(x, x, indexing="ij")
    dA = (x[1] - x[0]) ** 2
    for t in (0.05, 1.0, 20.0, 200.0):
        g = ou.law_at(s, t, 1.0, 1.0)
        tv = 0.5 * np.sum(np.abs(g.pdf(X, Y) - ref.pdf(X, Y))) * dA
        D = ou.kl_gaussian(g, ref)
        assert tv <= math.sqrt(2 * D)
