import math

import mpmath
import numpy as np
import pytest
from numpy.testing import assert_allclose

from dwlab.grid import GridFunction, GridSpec, lp_norm, moment
from dwlab.propagators import (HEAT_EXPANSION_SLOPES, KernelRangeError,
                               TruncationError, apply_S, apply_S_kernel,
                               apply_dtS, apply_heat, apply_wave,
                               damped_symbol, decay_scan, kernel_quadrature,
                               linear_pair_matrix, residual_scan)
from dwlab.special import gaussian_derivative

SPEC = GridSpec(64.0, 4096)


def _mp_sigma(t, xi):
    """High-precision sigma, dsigma from the scalar mode ODE solution."""
    with mpmath.workdps(40):
        t = mpmath.mpf(t)
        w = mpmath.mpf("0.25") - mpmath.mpf(xi) ** 2
        mu = mpmath.sqrt(abs(w))
        damp = mpmath.e ** (-t / 2)
        if w > 0:
            sig = damp * mpmath.sinh(t * mu) / mu
            dsig = damp * mpmath.cosh(t * mu) - sig / 2
        elif w == 0:
            sig = damp * t
            dsig = damp - sig / 2
        else:
            sig = damp * mpmath.sin(t * mu) / mu
            dsig = damp * mpmath.cos(t * mu) - sig / 2
        return float(sig), float(dsig)


@pytest.mark.parametrize("t", [0.3, 2.0, 11.0])
@pytest.mark.parametrize("xi", [0.0, 0.2, 0.499999, 0.5, 0.500001, 0.9, 4.0])
def test_symbol_against_mpmath(t, xi):
    spec = GridSpec(math.pi / xi if xi else math.pi, 16) if xi else None
    from dwlab.propagators import _symbol_pair
    sig, dsig = _symbol_pair(t, np.array([xi]))
    ref_s, ref_d = _mp_sigma(t, xi)
    assert_allclose(sig[0], ref_s, rtol=5e-14, atol=1e-300)
    assert_allclose(dsig[0], ref_d, rtol=5e-14, atol=5e-14)


def test_symbol_mass_mode_anchor():
    for t in (1.0, 5.0, 20.0):
        sym = damped_symbol(t, SPEC)
        assert sym.sigma[0] == pytest.approx(1.0 - math.exp(-t), rel=1e-14)
        assert sym.sigma_t[0] == pytest.approx(math.exp(-t), rel=1e-12)


def test_pair_matrix_semigroup_composition():
    a = linear_pair_matrix(0.7, SPEC)
    b = linear_pair_matrix(1.6, SPEC)
    c = linear_pair_matrix(2.3, SPEC)
    comp = (b[0] * a[0] + b[1] * a[2], b[0] * a[1] + b[1] * a[3],
            b[2] * a[0] + b[3] * a[2], b[2] * a[1] + b[3] * a[3])
    for got, want in zip(comp, c):
        scale = max(1.0, float(np.max(np.abs(want))))
        assert np.max(np.abs(got - want)) < 1e-12 * scale


def test_mass_functional_anchor():
    f = gaussian_derivative(0, SPEC)
    m0 = moment(f, 0)
    for t in (1.0, 5.0, 20.0):
        assert_allclose(moment(apply_S(t, f), 0), (1.0 - math.exp(-t)) * m0,
                        rtol=1e-12)
        assert_allclose(moment(apply_dtS(t, f), 0), math.exp(-t) * m0,
                        rtol=1e-10, atol=1e-14 * m0)


def test_kernel_mass_identity():
    # integral of the light-cone kernel equals the zero-mode symbol
    for t in (1.0, 5.0, 20.0):
        _, w = kernel_quadrature(t, SPEC.h)
        assert_allclose(np.sum(w), 1.0 - math.exp(-t), rtol=1e-10)


@pytest.mark.parametrize("j", [0, 1, 2])
def test_kernel_multiplier_duality(j):
    f = gaussian_derivative(j, SPEC)
    scale = np.max(np.abs(f.values))
    for t in (1.0, 5.0):
        direct = apply_S_kernel(t, f)
        mult = apply_S(t, f)
        err = np.max(np.abs(direct.values - mult.values))
        assert err <= 1e-6 * scale


def test_kernel_range_errors():
    f = gaussian_derivative(0, SPEC)
    with pytest.raises(KernelRangeError):
        apply_S_kernel(100.0, f)
    with pytest.raises(KernelRangeError):
        apply_S_kernel(0.0, f)


def test_truncation_guard():
    # data that does not vanish at the boundary is rejected
    bad = GridFunction(SPEC, np.ones(SPEC.points))
    with pytest.raises(TruncationError):
        apply_S(1.0, bad)
    # but the check can be disabled for torus-type data
    out = apply_S(1.0, bad, check_boundary=False)
    assert_allclose(out.values, (1.0 - math.exp(-1.0)) * np.ones(SPEC.points),
                    rtol=1e-12)


def test_heat_semigroup_self_similarity():
    # e^{t Lap} exp(-x^2/4) = (1+t)^{-1/2} exp(-x^2/(4(1+t)))
    f = gaussian_derivative(0, SPEC)
    t = 7.0
    out = apply_heat(t, f)
    x = SPEC.nodes
    exact = (1.0 + t) ** -0.5 * np.exp(-0.25 * x * x / (1.0 + t))
    assert_allclose(out.values, exact, atol=1e-13)


def test_wave_window_erf_oracle():
    # W(t) f = (1/2) int_{x-t}^{x+t} f: erf closed form for a gaussian bump
    from scipy.special import erf
    spec = GridSpec(32.0, 4096)
    x = spec.nodes
    f = GridFunction(spec, np.exp(-4.0 * x * x))
    t = 3.0
    out = apply_wave(t, f)
    exact = (math.sqrt(math.pi) / 8.0) * (erf(2.0 * (x + t))
                                          - erf(2.0 * (x - t)))
    assert np.max(np.abs(out.values - exact)) < 1e-4
    # and exactness on constants
    one = GridFunction(spec, np.ones(spec.points))
    w1 = apply_wave(1.3, one)
    assert_allclose(w1.values, 1.3, rtol=1e-13)


def test_decay_scan_smoke_slopes():
    # moderate window keeps this quick; tight slopes are acceptance work
    spec = GridSpec(256.0, 8192)
    times = np.geomspace(10.0, 100.0, 8)
    rep = decay_scan(gaussian_derivative(0, spec), 2.0, times,
                     window=(10.0, 100.0))
    assert abs(rep.fit.slope - HEAT_EXPANSION_SLOPES(2.0)[0]) < 0.05
    res = residual_scan(gaussian_derivative(0, spec), 2.0, times,
                        variant="heat", window=(10.0, 100.0))
    assert res.fit.slope < rep.fit.slope  # residual decays faster
    with pytest.raises(ValueError):
        residual_scan(gaussian_derivative(0, spec), 2.0, times,
                      variant="noise")


def test_decay_report_csv(tmp_path):
    spec = GridSpec(64.0, 2048)
    times = np.geomspace(5.0, 50.0, 5)
    rep = decay_scan(gaussian_derivative(1, spec), 2.0, times,
                     window=(5.0, 50.0), label="probe")
    path = tmp_path / "decay.csv"
    rep.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "t,norm"
    assert len(lines) == 6
    rec = rep.fit_record()
    assert rec["label"] == "probe" and rec["p"] == 2.0
