import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from dwlab.fitting import (critical_lifespan_model, fit_critical_lifespan,
                           fit_loglog)
from dwlab.special import lambert_w0


def test_fit_loglog_exact_power():
    x = np.geomspace(1.0, 100.0, 12)
    y = 3.5 * x ** -1.75
    fit = fit_loglog(x, y, window=(1.0, 100.0))
    assert_allclose(fit.slope, -1.75, rtol=1e-12)
    assert_allclose(math.exp(fit.intercept), 3.5, rtol=1e-12)
    assert fit.r_squared == pytest.approx(1.0)
    assert fit.accepted
    assert_allclose(fit.predict(x), y, rtol=1e-12)


def test_fit_loglog_window_and_rejection():
    x = np.geomspace(1.0, 1000.0, 30)
    y = x ** -2.0
    y[x < 10.0] = 1.0   # pollute outside the window
    fit = fit_loglog(x, y, window=(10.0, 1000.0))
    assert_allclose(fit.slope, -2.0, rtol=1e-10)
    noisy = x ** -1.0 * np.exp(np.sin(7.0 * np.log(x)) * 2.0)
    bad = fit_loglog(x, noisy, window=(1.0, 1000.0))
    assert not bad.accepted
    few = fit_loglog(x[:2], y[:2], window=(1.0, 1000.0))
    assert not few.accepted and math.isnan(few.slope)


def test_fit_loglog_default_window_is_top_decade():
    x = np.geomspace(1.0, 1000.0, 40)
    y = x ** -0.5
    fit = fit_loglog(x, y)
    assert fit.window == (100.0, 1000.0)


def test_critical_fit_recovers_parameters():
    eps = np.geomspace(0.01, 0.5, 6)
    A, B = 2.3, 1.7
    T = critical_lifespan_model(eps, A, B)
    Af, Bf, r2 = fit_critical_lifespan(eps, T)
    assert_allclose(Af, A, rtol=1e-5)
    assert_allclose(Bf, B, rtol=1e-4)
    assert r2 > 0.999999


def test_critical_fit_pure_power_degenerates():
    # data with no Lambert correction: B collapses toward 0, r2 still judges
    # how much of the log-T spread the model explains
    eps = np.geomspace(0.05, 0.5, 5)
    T = 9.0 * eps ** -0.55
    A, B, r2 = fit_critical_lifespan(eps, T)
    assert B < 1e-3
    assert r2 > 0.9


def test_critical_model_formula():
    # single point sanity: T = A eps^{-2/3} exp(2 W(B eps^{-1/2})/3)
    val = critical_lifespan_model(0.04, 1.5, 2.0)
    w = lambert_w0(2.0 * 0.04 ** -0.5)
    assert_allclose(val, 1.5 * 0.04 ** (-2.0 / 3.0) * math.exp(2.0 * w / 3.0),
                    rtol=1e-12)
