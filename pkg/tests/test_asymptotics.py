import math
import warnings

import numpy as np
import pytest
from scipy.special import gamma

from treeprofile.asymptotics import (
    cauchy_inversion,
    estimate_amplitude,
    fit_amplitude,
    height_report,
    mean_profile_asymptotic,
    mode_gaussian,
    remainder_trend,
    second_moment_bound,
    second_moment_exponent_check,
    subcritical_remainder,
)
from treeprofile.errors import DomainError, PreconditionError, RegimeError
from treeprofile.exact import expected_profile_table, expected_W
from treeprofile.model import BST, ModelParams
from treeprofile.spectral import critical_constants, lambda1_real, profile_exponent


@pytest.mark.parametrize("p", [BST, ModelParams(2, 1), ModelParams(3, 0)])
def test_amplitude_at_one(p):
    est = estimate_amplitude(p, 1.0, N=500)
    assert est.E_hat == pytest.approx(1.0, abs=1e-12) and not est.degraded
    assert est.delta_hat == 0.0


def test_external_amplitude_at_one_positive():
    est = estimate_amplitude(BST, 1.0, N=500, external=True)
    # E U_n(1) = n + 1, so the fitted constant is 1 with a 1/n correction
    assert est.E_real == pytest.approx(1.0, abs=1e-8)
    assert est.delta_hat == pytest.approx(1.0, abs=1e-4)


@pytest.mark.parametrize("z", [0.8, 1.2, 1.5])
def test_bst_amplitude_closed_form(z):
    est = estimate_amplitude(BST, z, N=4000)
    assert est.E_real == pytest.approx(1 / ((2 * z - 1) * gamma(2 * z)), rel=2e-3)


def test_fit_recovers_synthetic():
    ns = np.arange(500, 4001)
    e = 1.3 - 0.8 * ns**-0.6
    E, c, delta, res, ok = fit_amplitude(ns, e)
    assert ok
    assert E == pytest.approx(1.3, rel=1e-2)
    assert delta == pytest.approx(0.6, rel=1e-2)
    assert c == pytest.approx(-0.8, rel=1e-2)


def test_fit_recovers_through_growth_factor():
    p = ModelParams(3, 1)
    lam = lambda1_real(p, 1.4)
    ns = np.arange(400, 3001)
    g = 2.5 * ns ** (lam - 1) * (0.9 + 0.4 * ns**-0.35)
    E, _, delta, _, ok = fit_amplitude(ns, g / (2.5 * ns ** (lam - 1)))
    assert ok and E == pytest.approx(0.9, rel=1e-2) and delta == pytest.approx(0.35, rel=1e-2)


def test_amplitude_sequence_cauchy():
    z = 1.2
    g = expected_W(BST, z, 4096).g.real
    n = 2 ** np.arange(4, 13)
    e = g[n] / n ** (lambda1_real(BST, z) - 1)
    assert np.all(e > 0)
    assert np.all(np.diff(np.abs(np.diff(e))) < 0)


def test_amplitude_domain():
    with pytest.raises(DomainError):
        estimate_amplitude(BST, 0.4, N=200)
    with pytest.raises(PreconditionError):
        estimate_amplitude(BST, 1.2, N=50)


def test_exponent_sign():
    cc = critical_constants(BST)
    for a in np.linspace(cc.alpha0 + 0.05, cc.alpha_plus - 0.05, 12):
        assert profile_exponent(BST, a) > 0
    for a in (cc.alpha_plus + 0.1, cc.alpha_plus + 1.0):
        assert profile_exponent(BST, a) < 0
    assert profile_exponent(BST, 2.0) == pytest.approx(1.0, abs=1e-12)


def test_saddle_ratio_trend():
    tab = expected_profile_table(BST, 3000)
    ratios = []
    for n in (300, 1000, 3000):
        k = int(math.floor(2 * math.log(n)))
        est = mean_profile_asymptotic(BST, n, k)
        assert est.prediction > 0
        ratios.append(est.prediction / tab.mean[n, k])
    dist = np.abs(np.array(ratios) - 1)
    assert np.all(np.diff(dist) < 0)


def test_saddle_regime():
    cc = critical_constants(BST)
    n = 1000
    with pytest.raises(RegimeError):
        mean_profile_asymptotic(BST, n, int(cc.alpha_plus * math.log(n)) + 1, E_hat=1.0)
    with pytest.raises(RegimeError):
        mean_profile_asymptotic(BST, n, 3, E_hat=1.0)
    # the external formula extends below alpha_0
    est = mean_profile_asymptotic(BST, n, 5, external=True, amp_N=600)
    assert est.prediction > 0


def test_mode_gaussian():
    n = 3000
    L = math.log(n)
    k0 = round(2 * L)
    dp = expected_profile_table(BST, n, 30).mean[n, k0]
    assert abs(mode_gaussian(BST, n, k0) / dp - 1) < 0.35
    mode = 2 * L
    left, right = mode_gaussian(BST, n, [mode - 2.0, mode + 2.0])
    assert left == right
    peak = mode_gaussian(BST, n, mode)
    assert peak == pytest.approx(n / math.sqrt(2 * math.pi * 2 * L))
    assert mode_gaussian(BST, n, mode + math.sqrt(2 * L)) / peak == pytest.approx(math.exp(-0.5))


def test_mode_gaussian_warns_far_out():
    with pytest.warns(RuntimeWarning):
        mode_gaussian(BST, 1000, 40)


@pytest.mark.parametrize("p", [BST, ModelParams(2, 1), ModelParams(3, 0)])
def test_inversion_matches_dp(p):
    n = 200
    dp = expected_profile_table(p, n).mean[n]
    K = 20
    for beta in (0.5, 1.0, 1.5):
        inv = cauchy_inversion(p, beta, n, K=K)
        np.testing.assert_allclose(inv, dp[: K + 1], rtol=1e-7, atol=1e-9 * dp.max())
    np.testing.assert_allclose(cauchy_inversion(p, 1.0, n), dp, rtol=1e-9, atol=1e-9 * dp.max())


def test_inversion_small():
    np.testing.assert_allclose(cauchy_inversion(BST, 1.0, 3), [1, 4 / 3, 2 / 3, 0], atol=1e-14)
    with pytest.raises(PreconditionError):
        cauchy_inversion(BST, 1.0, 10, M=10)


def test_slope_at_one():
    chk = second_moment_exponent_check(BST, 1.0, N=1000)
    assert chk.slope == pytest.approx(2.0, abs=1e-9)
    assert chk.bound == 2.0


def test_bound_examples():
    assert second_moment_bound(BST, 1.2) == pytest.approx(2.8)
    assert second_moment_bound(BST, 1j) == pytest.approx(1.0)


@pytest.mark.parametrize("z,cap", [(1.2, 2.95), (1j, 1.15)])
def test_slope_examples(z, cap):
    assert second_moment_exponent_check(BST, z, N=2000).slope <= cap


def test_remainder_basics():
    tab = expected_profile_table(BST, 400, 12)
    assert subcritical_remainder(BST, 200, 0, tab) == 0
    for n in (10, 50, 400):
        assert all(subcritical_remainder(BST, n, k, tab) >= -1e-9 for k in range(13))
    with pytest.raises(PreconditionError):
        subcritical_remainder(BST, 10, -1)


def test_remainder_vanishes_below_alpha_minus():
    # at fixed k the deficit of level k dies out as n grows
    ks, r = remainder_trend(BST, 0.2, [1000, 10000])
    assert ks[0] == ks[1] == 1
    assert r[1] < r[0] and r[1] < 1e-3
    ks, r = remainder_trend(BST, 0.2, [10**4, 10**5, 10**6])
    assert np.all(r < 1e-2)


def test_remainder_grows_above_alpha_minus():
    _, r = remainder_trend(BST, 0.6, [100, 1000, 10000, 100000])
    assert np.all(np.diff(r) > 0)


def test_height_report():
    rep = height_report(BST, 2000, reps=30, seed=2)
    assert rep.alpha_plus == pytest.approx(4.31107, abs=1e-5)
    assert 1.5 < rep.ratio < rep.alpha_plus
    again = height_report(BST, 2000, reps=30, seed=2, workers=2)
    assert again.mean_height == rep.mean_height
