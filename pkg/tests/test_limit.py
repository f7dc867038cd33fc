import numpy as np
import pytest
from scipy import stats

from treeprofile.errors import DomainError, PreconditionError
from treeprofile.exact import expected_profile_table
from treeprofile.limit import (
    adaptive_depth,
    dirichlet_moment,
    dirichlet_pair_moment,
    empirical_distance,
    mc_profile_ratio,
    sample_dirichlet,
    sample_Y,
    sample_Y_many,
    second_moment_Y,
    variance_denominator,
    variance_Y,
    variance_Y_depth,
)
from treeprofile.model import BST, ModelParams
from treeprofile.rng import RngStream
from treeprofile.spectral import critical_constants


@pytest.mark.parametrize("m,t", [(2, 0), (3, 1), (4, 2)])
def test_dirichlet_marginal(m, t):
    p = ModelParams(m, t)
    v = sample_dirichlet(p, RngStream(1), 10**5)
    np.testing.assert_allclose(v.sum(axis=1), 1.0, atol=1e-12)
    assert np.all(v > 0)
    assert stats.kstest(v[:, 0], stats.beta(t + 1, (m - 1) * (t + 1)).cdf).pvalue > 1e-3
    se = v[:, 0].std() / np.sqrt(v.shape[0])
    assert abs(v[:, 0].mean() - 1 / m) < 3 * se


def test_dirichlet_single_draw():
    v = sample_dirichlet(ModelParams(3, 0), RngStream(2))
    assert v.shape == (3,)


def test_dirichlet_moments():
    assert dirichlet_moment(BST, 1) == pytest.approx(0.5)
    assert dirichlet_moment(BST, 2) == pytest.approx(1 / 3)
    for m, t in [(2, 0), (3, 1), (5, 2)]:
        assert dirichlet_moment(ModelParams(m, t), 0) == pytest.approx(1.0)
        assert dirichlet_pair_moment(ModelParams(m, t), 0) == pytest.approx(1.0)
    assert dirichlet_pair_moment(BST, 1) == pytest.approx(1 / 6)
    with pytest.raises(DomainError):
        dirichlet_moment(ModelParams(3, 1), -2.0)
    with pytest.raises(DomainError):
        dirichlet_pair_moment(BST, -1.0)


def test_pair_moment_monte_carlo():
    p = ModelParams(3, 1)
    v = sample_dirichlet(p, RngStream(3), 10**6)
    x = (v[:, 0] * v[:, 1]) ** 1.3
    assert abs(x.mean() - dirichlet_pair_moment(p, 1.3)) < 3 * x.std() / np.sqrt(x.size)
    y = v[:, 2] ** 1.3
    assert abs(y.mean() - dirichlet_moment(p, 1.3)) < 3 * y.std() / np.sqrt(y.size)


@pytest.mark.parametrize("p", [BST, ModelParams(3, 1)])
def test_Y_trivial_cases(p):
    assert sample_Y(p, 1.7, 0, RngStream(1)) == 1.0
    np.testing.assert_allclose(sample_Y(p, 1.0, 6, RngStream(1), size=50), 1.0, rtol=1e-12)
    with pytest.raises(PreconditionError):
        sample_Y(p, 1.2, -1)


@pytest.mark.parametrize("p,z,K", [(BST, 1.2, 12), (BST, 0.8, 10), (ModelParams(3, 1), 1.3, 6),
                                   (ModelParams(2, 2), 0.9, 9)])
def test_Y_mean_one(p, z, K):
    y = sample_Y(p, z, K, RngStream(7), size=20000)
    assert abs(y.mean() - 1) < 3 * y.std() / np.sqrt(y.size)


def test_Y_mean_complex():
    y = sample_Y(BST, 1.1 + 0.2j, 8, RngStream(8), size=20000)
    for part in (y.real - 1, y.imag):
        assert abs(part.mean()) < 4 * part.std() / np.sqrt(y.size)


@pytest.mark.parametrize("p,beta,K", [(BST, 1.2, 8), (BST, 0.9, 8), (ModelParams(3, 1), 1.3, 5)])
def test_Y_variance_at_depth(p, beta, K):
    y = sample_Y(p, beta, K, RngStream(9), size=40000)
    c = (y - y.mean()) ** 2
    assert abs(c.mean() - variance_Y_depth(p, beta, K)) < 3 * c.std() / np.sqrt(y.size)


def test_variance_closed_form():
    assert second_moment_Y(BST, 1.0) == pytest.approx(1.0, abs=1e-12)
    assert variance_Y(BST, 1.0) == pytest.approx(0.0, abs=1e-12)
    assert variance_Y_depth(BST, 1.0, 9) == pytest.approx(0.0, abs=1e-12)
    for K in range(1, 30):
        assert variance_Y_depth(BST, 1.2, K) >= variance_Y_depth(BST, 1.2, K - 1)
    assert variance_Y_depth(BST, 1.2, 200) == pytest.approx(variance_Y(BST, 1.2), rel=1e-12)
    assert variance_Y(ModelParams(3, 1), 1.3) > 0


@pytest.mark.parametrize("p", [BST, ModelParams(2, 1), ModelParams(3, 0)])
def test_variance_denominator_sign_flips(p):
    lo, hi = critical_constants(p).J
    for edge in (lo, hi):
        inside = edge * (1 + 1e-6) if edge == lo else edge * (1 - 1e-6)
        outside = edge * (1 - 1e-6) if edge == lo else edge * (1 + 1e-6)
        assert variance_denominator(p, inside) > 0 > variance_denominator(p, outside)


def test_variance_outside_J():
    lo, hi = critical_constants(BST).J
    with pytest.raises(DomainError):
        variance_Y(BST, hi + 0.01)
    with pytest.raises(DomainError):
        variance_Y(BST, lo - 0.01)


def test_distance_examples():
    rng = np.random.default_rng(0)
    a = rng.normal(size=1000)
    rep = empirical_distance(a, a.copy())
    assert rep.ell_s == 0 and rep.ks == 0
    assert empirical_distance(a, a + 0.3, s=1).ell_s == pytest.approx(0.3)
    b = rng.normal(size=10**4)
    c = rng.normal(size=10**4)
    assert empirical_distance(b, c).ell_s < 0.05
    with pytest.raises(PreconditionError):
        empirical_distance(a[:50], a)
    with pytest.raises(PreconditionError):
        empirical_distance(a, a, s=3)


def test_distance_unequal_sizes():
    a = np.arange(100.0)
    b = np.repeat(a, 3)
    assert empirical_distance(a, b).ell_s == pytest.approx(0.0, abs=1e-12)
    rep = empirical_distance(a, b + 2.0, s=2)
    assert rep.ell_s == pytest.approx(2.0) and rep.n_b == 300


def test_mc_ratio_mean_one():
    for alpha, ext in [(2.0, False), (1.5, False), (0.8, True)]:
        s = mc_profile_ratio(BST, 2000, alpha, reps=400, seed=5, external=ext)
        assert abs(s.ratios.mean() - 1) < 4 * s.ratios.std() / np.sqrt(400)
        assert s.k == int(np.floor(alpha * np.log(2000)))


def test_mc_ratio_uses_exact_mean():
    s = mc_profile_ratio(ModelParams(3, 1), 500, 1.0, reps=10, seed=1)
    assert s.mean == pytest.approx(expected_profile_table(ModelParams(3, 1), 500).mean[500, s.k])


def test_mc_ratio_zero_mean():
    with pytest.raises(DomainError):
        mc_profile_ratio(BST, 20, 10.0, reps=5)


def test_mc_ratio_worker_invariant():
    a = mc_profile_ratio(BST, 1000, 2.0, reps=64, seed=11, workers=1)
    b = mc_profile_ratio(BST, 1000, 2.0, reps=64, seed=11, workers=3)
    np.testing.assert_array_equal(a.ratios, b.ratios)


def test_Y_many_worker_invariant():
    a = sample_Y_many(BST, 1.2, 6, 300, seed=4, workers=1)
    b = sample_Y_many(BST, 1.2, 6, 300, seed=4, workers=2)
    np.testing.assert_array_equal(a.values, b.values)
    assert a.depth == 6 and a.value == a.values[0]


def test_depth_stabilisation():
    gaps = []
    for K in (2, 4, 6):
        a = sample_Y_many(BST, 1.2, K, 20000, seed=K).values.real
        b = sample_Y_many(BST, 1.2, K + 2, 20000, seed=K + 50).values.real
        gaps.append(empirical_distance(a, b).ell_s)
    assert np.all(np.diff(gaps) < 0)


def test_adaptive_depth():
    K, gaps = adaptive_depth(BST, 1.2, reps=20000, gap=0.02)
    assert gaps[-1] < 0.02
    assert K >= 4
