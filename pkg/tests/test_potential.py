import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from multibath.potential import (VB_PROFILE_OSC, CertificationError, FunctionPotential, PotentialError,
                                 Quadratic, RankOneInference, SoftSpinGlass, SoftSpinGlassParams,
                                 certify_split, check_confinement, make_potential,
                                 sample_rank_one_data, sample_spin_glass_disorder, smoothing_eta)


def test_quadratic_values(p0):
    assert p0.eval([0.0], [0.0]) == 0.0
    assert p0.eval([1.0], [1.0]) == pytest.approx(2.0)
    g1, g2 = p0.grad([1.0], [0.0])
    assert g1[0] == 2.0 and g2[0] == 0.5


def test_quadratic_rejects_indefinite():
    with pytest.raises(PotentialError):
        Quadratic(1.0, 1.0, 1.0)
    with pytest.raises(PotentialError):
        Quadratic(-1.0, 1.0, 0.0)


def test_quadratic_hessian_is_A(p0):
    H11, H12, H22 = p0.hessian_blocks([0.3], [-1.2])
    assert (H11[0, 0], H12[0, 0], H22[0, 0]) == (2.0, 0.5, 1.0)


def _fd_grad(p, z, h=1e-6):
    g = np.zeros_like(z)
    for k in range(len(z)):
        e = np.zeros_like(z)
        e[k] = h
        g[k] = (p.eval((z + e)[:p.d1], (z + e)[p.d1:]) - p.eval((z - e)[:p.d1], (z - e)[p.d1:])) / (2 * h)
    return g


@pytest.mark.parametrize("kind,kw", [("quadratic", {}), ("spin-glass", dict(N=5)),
                                      ("rank-one", dict(N1=4, N2=3, delta=0.5))])
def test_gradient_matches_finite_differences(kind, kw):
    p = make_potential(kind, **kw)
    rng = np.random.default_rng(3)
    for _ in range(10):
        z = rng.uniform(-1.5, 1.5, p.d1 + p.d2)
        g = np.concatenate(p.grad(z[:p.d1], z[p.d1:]))
        fd = _fd_grad(p, z)
        assert np.max(np.abs(g - fd)) / (1 + np.max(np.abs(g))) < 1e-6


@pytest.mark.parametrize("kind,kw", [("spin-glass", dict(N=4)), ("rank-one", dict(N1=3, N2=2))])
def test_hessian_matches_gradient_differences(kind, kw):
    p = make_potential(kind, **kw)
    z = np.random.default_rng(0).uniform(-1, 1, p.d1 + p.d2)
    H = p.hessian(z[:p.d1], z[p.d1:])
    h = 1e-6
    for k in range(len(z)):
        e = np.zeros_like(z)
        e[k] = h
        col = (np.concatenate(p.grad((z + e)[:p.d1], (z + e)[p.d1:]))
               - np.concatenate(p.grad((z - e)[:p.d1], (z - e)[p.d1:]))) / (2 * h)
        np.testing.assert_allclose(H[:, k], col, atol=1e-6)


def test_spin_glass_single_spin():
    p = SoftSpinGlass(SoftSpinGlassParams(1, 1.0, 1.0, 2.0, 1.0, np.zeros((1, 1))))
    assert p.eval([1.0], [0.0]) == pytest.approx(0.0)
    _, H12, _ = p.hessian_blocks([0.3], [0.1])
    assert H12[0, 0] == -1.0


def test_spin_glass_coupling_block():
    p = make_potential("spin-glass", N=6, delta0=2.0)
    _, H12, _ = p.hessian_blocks(np.ones(6), np.zeros(6))
    np.testing.assert_array_equal(H12, -math.sqrt(2.0) * np.eye(6))


def test_rank_one_origin_blocks():
    p = make_potential("rank-one", N1=4, N2=3, delta=0.5, a=3.0, b=2.0)
    H11, H12, H22 = p.hessian_blocks(np.zeros(4), np.zeros(3))
    np.testing.assert_allclose(H11, 3.0 * np.eye(4))
    np.testing.assert_allclose(H22, 2.0 * np.eye(3))
    np.testing.assert_allclose(H12, -math.sqrt(0.5 / 7) * p.params.J)


def test_smoothing_eta_branches():
    assert smoothing_eta(0.0)[:2] == (0.0, 0.0)
    assert smoothing_eta(3.0)[0] == pytest.approx(64.0)
    x = np.linspace(-5, 5, 10001)
    v, d1, d2 = smoothing_eta(x)
    assert np.all(d2 >= 2 - 1e-12)
    pos = x >= 0
    assert np.all(d1[pos] >= 2 * x[pos] - 1e-12)
    np.testing.assert_allclose(v, smoothing_eta(-x)[0])


def test_smoothing_eta_is_c2():
    # derivatives agree with differences of the value across the blending interval
    x = np.linspace(1.4, 1.85, 2001)
    h = 1e-5
    k = 1e-4
    v = lambda t: smoothing_eta(t)[0]
    np.testing.assert_allclose(smoothing_eta(x)[1], (v(x + h) - v(x - h)) / (2 * h), atol=1e-5)
    np.testing.assert_allclose(smoothing_eta(x)[2], (v(x + k) - 2 * v(x) + v(x - k)) / k ** 2, atol=1e-3)


def test_profile_oscillation_exceeds_nominal():
    p = make_potential("spin-glass", N=20, Aq=10.0)
    assert p.osc_bounded_part() == pytest.approx(5.0 * 20 * VB_PROFILE_OSC)
    assert VB_PROFILE_OSC > 1.0


def test_disorder_is_deterministic():
    np.testing.assert_array_equal(sample_spin_glass_disorder(5, 30), sample_spin_glass_disorder(5, 30))
    assert not np.array_equal(sample_spin_glass_disorder(5, 30), sample_spin_glass_disorder(6, 30))


def test_disorder_statistics():
    J = sample_spin_glass_disorder(0, 1000)
    assert abs(J.mean()) < 4 / 1000
    ok = sum(np.linalg.norm(sample_spin_glass_disorder(s, 200), 2) / math.sqrt(200) <= 2.5 for s in range(20))
    assert ok >= 19


def test_rank_one_data():
    u, v, J = sample_rank_one_data(0, 5, 4, 0.0)
    np.testing.assert_array_equal(np.abs(u), 1.0)
    assert J.shape == (5, 4)
    # zero signal: J is pure noise from the same stream
    _, _, J2 = sample_rank_one_data(0, 5, 4, 0.0)
    np.testing.assert_array_equal(J, J2)


def test_rank_one_mean_over_reseeds():
    u, v, _ = sample_rank_one_data(0, 3, 2, 4.0)
    mean = np.zeros((3, 2))
    n = 10000
    for s in range(n):
        uu, vv, J = sample_rank_one_data(s, 3, 2, 4.0)
        mean += J * np.outer(uu, vv)  # undo the sign of the latent draw
    mean /= n
    np.testing.assert_allclose(mean, math.sqrt(4.0 / 5), atol=4e-2)


def test_quadratic_growth_constants(p0):
    g = p0.growth()
    assert g.a == pytest.approx((3 - math.sqrt(2)) / 2)
    rep = check_confinement(p0, box=3.0, n=4000)
    assert rep.a == pytest.approx(g.a, abs=1e-6)
    assert rep.violations == []
    dec = check_confinement(Quadratic(2.0, 3.0, 0.0), box=3.0, n=4000)
    assert dec.A4["a1"] == pytest.approx(2.0, abs=1e-7)
    assert dec.A4["a2"] == pytest.approx(3.0, abs=1e-7)
    assert dec.A4["a0"] == pytest.approx(0.0, abs=1e-7)


def test_spin_glass_fast_confinement_with_quarter_B():
    # s.grad_s V >= (A - K - Delta0/B)|s|^2 - (B/4)|y|^2 up to a bounded remainder
    p = make_potential("spin-glass", N=4, Aq=10.0, delta=1.0, delta0=1.0, B=1.0)
    K = np.max(np.abs(np.linalg.eigvalsh(p.params.J + p.params.J.T))) / (2 * math.sqrt(4))
    coef = 10.0 - K - 1.0

    def worst(box):
        g = np.random.default_rng(1)
        s, y = g.uniform(-box, box, (20000, 4)), g.uniform(-box, box, (20000, 4))
        gs, _ = p.grad(s, y)
        return np.min(np.sum(s * gs, -1) - coef * np.sum(s * s, -1) + 0.25 * np.sum(y * y, -1))

    w3, w30 = worst(3.0), worst(30.0)
    assert np.isfinite(w3) and w30 >= w3 - 1e-6 * abs(w3) - 50


def test_certify_quadratic(p0):
    sp = certify_split(p0, n=200, restarts=2)
    assert sp.alpha1 == pytest.approx(2.0)
    assert sp.alpha2 == pytest.approx(0.875)
    assert sp.oscVb == 0.0
    assert certify_split(Quadratic(2.0, 1.5, 0.0), n=50, restarts=1).alpha2 == pytest.approx(1.5)


def test_certify_rejects_nonconvex():
    p = FunctionPotential(lambda a, b: -a[..., 0] ** 2 + b[..., 0] ** 2, 1, 1)
    with pytest.raises(CertificationError) as exc:
        certify_split(p, n=50, restarts=1)
    assert exc.value.witness is not None


def test_make_potential_unknown():
    with pytest.raises(PotentialError):
        make_potential("banana")


@given(st.floats(0.2, 5), st.floats(0.2, 5), st.floats(-0.9, 0.9))
def test_quadratic_is_half_zAz(a, b, rho):
    c = rho * math.sqrt(a * b)
    p = Quadratic(a, b, c)
    z = np.array([0.7, -1.3])
    assert p.eval(z[:1], z[1:]) == pytest.approx(0.5 * z @ p.A @ z)
