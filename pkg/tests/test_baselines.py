import math

import numpy as np
import pytest

from canyonpl.baselines import (SlopeInterceptModel, fit_slope_intercept, gpp_uma_los, gpp_umi_nlos,
                                predict_slope_intercept)


def test_hand_values():
    assert gpp_uma_los(100.0) == pytest.approx(28 + 44 + 20 * math.log10(28), abs=1e-9)
    assert gpp_umi_nlos(100.0) == pytest.approx(22.4 + 70.6 + 21.3 * math.log10(28), abs=1e-9)
    assert predict_slope_intercept(SlopeInterceptModel(46.9, 3.1, 6.3), 100.0) == pytest.approx(108.9, abs=1e-9)
    assert round(gpp_uma_los(100.0), 4) == 100.9432
    assert round(gpp_umi_nlos(100.0), 4) == 123.8245


def test_vectorized():
    d = np.array([10.0, 100.0, 1000.0])
    np.testing.assert_allclose(np.diff(gpp_uma_los(d)), 22.0)
    np.testing.assert_allclose(np.diff(gpp_umi_nlos(d)), 35.3)
    assert isinstance(gpp_uma_los(50.0), float)


@pytest.mark.parametrize("fn", [gpp_uma_los, gpp_umi_nlos])
def test_rejects_non_positive(fn):
    with pytest.raises(ValueError):
        fn(0.0)
    with pytest.raises(ValueError):
        fn(10.0, fc=-1.0)


def test_noiseless_exact():
    d = np.geomspace(10, 500, 50)
    m = fit_slope_intercept(d, 46.9 + 31.0 * np.log10(d))
    assert m.A == pytest.approx(46.9, abs=1e-9) and m.n == pytest.approx(3.1, abs=1e-9)
    assert m.sigma < 1e-9


def test_monte_carlo_recovery():
    rng = np.random.default_rng(2024)
    A, n = [], []
    for _ in range(200):
        d = rng.uniform(20, 500, 300)
        m = fit_slope_intercept(d, 46.9 + 31.0 * np.log10(d) + rng.normal(0, 6.3, 300))
        A.append(m.A)
        n.append(m.n)
    # unbiased estimator: the mean over replicates sits within 3 standard errors
    assert abs(np.mean(n) - 3.1) < 3 * np.std(n) / np.sqrt(200)
    assert abs(np.mean(A) - 46.9) < 3 * np.std(A) / np.sqrt(200)


def test_equal_distances_singular():
    with pytest.raises(ValueError, match="singular"):
        fit_slope_intercept([50.0] * 5, [100.0] * 5)


def test_residual_is_rmse():
    d = np.array([10.0, 20.0, 40.0, 80.0])
    pl = np.array([80.0, 92.0, 97.0, 110.0])
    m = fit_slope_intercept(d, pl)
    assert m.sigma == pytest.approx(np.sqrt(np.mean((pl - m.predict(d)) ** 2)))
