import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from multibath import divergence as dv
from multibath.ou_exact import GaussianMeasure, kl_gaussian


@pytest.fixture
def ref(sigma_p0):
    return GaussianMeasure(np.zeros(2), sigma_p0)


def _draw(g, n, seed):
    return np.random.default_rng(seed).multivariate_normal(g.mean, g.cov, size=n)


def test_gaussian_fit_of_reference_draws(ref):
    k = dv.gaussian_fit_kl(_draw(ref, 1_000_000, 0), ref)
    # plug-in bias of a 5-parameter fit is about 5/(2n)
    assert 0 <= k["D"] < 3e-5
    assert k["D"] == pytest.approx(k["D1"] + k["D2"], abs=1e-15)
    assert k["D"] == pytest.approx(k["D_joint"], abs=1e-12)


def test_gaussian_fit_mean_shift(ref):
    shifted = GaussianMeasure(np.array([1.0, 0.0]), ref.cov)
    expect = 0.5 * np.array([1.0, 0.0]) @ np.linalg.inv(ref.cov) @ np.array([1.0, 0.0])
    k = dv.gaussian_fit_kl_batches(_draw(shifted, 200_000, 1), ref)
    assert abs(k["D"] - expect) < 4 * k["se"] + 1e-3


def test_gaussian_fit_needs_samples(ref):
    with pytest.raises(ValueError):
        dv.gaussian_fit_kl(np.zeros((10, 2)), ref)


def test_histogram_point_mass_against_uniform():
    # edge bins absorb the reference mass outside the box, so the box spans [-4,8] x [-1,2]
    e = np.linspace(0, 4, 5)
    inside = lambda a, b: (a >= -4) & (a <= 8) & (b >= -1) & (b <= 2)
    uniform = lambda a, b: np.where(inside(a, b), 1 / 36, 0.0)
    s = np.full((500, 2), [1.5, 0.5])
    k = dv.histogram_kl(s, uniform, edges=(e, np.array([0.0, 1.0])))
    assert k["D"] == pytest.approx(math.log(12), abs=1e-12)


def test_histogram_chain_rule_and_bias(ref):
    s = _draw(ref, 1_000_000, 2)
    k = dv.histogram_kl(s, ref)
    assert k["D"] == pytest.approx(k["D1"] + k["D2"], abs=1e-12)
    assert k["label"] == dv.BIASED_LABEL
    # bins-over-2n order of the plug-in bias, reported rather than required to vanish
    assert 0 < k["D"] < 64 * 64 / (2 * 1_000_000) * 2


def test_histogram_thin_rows_are_reported(ref):
    s = _draw(ref, 300, 3)
    k = dv.histogram_kl(s, ref)
    assert k["skipped_mass"] > 0
    assert 0 < k["skipped_mass"] < 1


def test_tv_discrete_cases():
    p = np.array([0.2, 0.3, 0.5])
    assert dv.tv_discrete(p, p) == 0.0
    assert dv.tv_discrete([1, 0], [0, 1]) == 1.0


@given(st.floats(-1.0, 1.0), st.floats(0.5, 2.0), st.integers(500, 5000))
def test_discrete_pinsker_on_histograms(shift, scale, n):
    ref = GaussianMeasure(np.zeros(2), np.eye(2))
    s = np.random.default_rng(n).standard_normal((n, 2)) * scale + shift
    k = dv.histogram_kl(s, ref, n_bins=16)
    tv = dv.tv_histogram(s, ref, n_bins=16)
    assert tv <= math.sqrt(2 * k["D"]) + 1e-12


def test_tv_standard_error(ref):
    s = _draw(ref, 20_000, 5)
    tv, se = dv.tv_histogram(s, ref, with_se=True)
    assert 0 < se < 0.01 and 0 < tv < 0.2


def test_moment_table():
    z = np.zeros(100)
    m = dv.moment_table(z, z, powers=(1, 2))
    assert all(v == 0 for v in m.values())
    g = np.random.default_rng(0).standard_normal((200_000, 3))
    m = dv.moment_table(g[:, :2], g[:, 2:], powers=(2,))
    assert m[("x1", 2)] == pytest.approx(2.0, abs=4 * math.sqrt(8 / 200_000))


def test_divergence_row(ref):
    s = _draw(GaussianMeasure(np.array([0.3, 0.0]), ref.cov), 50_000, 6)
    row = dv.divergence_row(1.0, s, ref, method="gaussian")
    assert row.D_emp == pytest.approx(row.D1_emp + row.D2_emp)
    assert row.pinsker_rhs == pytest.approx(math.sqrt(2 * row.D_emp))
    assert len(row.row()) == len(dv.DivergenceRow.HEADER)
    exact = kl_gaussian(GaussianMeasure(np.array([0.3, 0.0]), ref.cov), ref)
    assert row.D_emp == pytest.approx(exact, abs=2e-3)
