"""Hot numerical kernels: numba-compiled loops with pure-numpy fallbacks.

Set DWLAB_DISABLE_NUMBA=1 to force the numpy paths (also used automatically
when numba is not importable).  Both implementations of every kernel are
exported so benchmarks/bench_kernels.py can time them side by side.
"""
from __future__ import annotations

import math
import os

import numpy as np

_DISABLE = os.environ.get("DWLAB_DISABLE_NUMBA", "").strip().lower() in {"1", "true", "yes", "on"}

try:
    if _DISABLE:
        raise ImportError("numba disabled by DWLAB_DISABLE_NUMBA")
    from numba import njit as _njit

    HAVE_NUMBA = True
except ImportError:
    _njit = None
    HAVE_NUMBA = False


def _maybe_jit(fn):
    if HAVE_NUMBA:
        return _njit(cache=True)(fn)
    return fn


# ----------------------------------------------------------------------
# modified Bessel I0: power series for y <= 20, asymptotic beyond
# ----------------------------------------------------------------------

I0_SERIES_CUT = 20.0


def _i0_scalar(y):
    if y <= I0_SERIES_CUT:
        q = 0.25 * y * y
        term = 1.0
        s = 1.0
        for k in range(1, 60):
            term *= q / (k * k)
            s += term
            if term < 1e-18 * s:
                break
        return s
    # I0(y) ~ e^y / sqrt(2 pi y) * sum c_k y^-k, c_k = c_{k-1} (2k-1)^2 / (8k)
    s = 1.0
    term = 1.0
    for k in range(1, 30):
        new = term * (2.0 * k - 1.0) ** 2 / (8.0 * k * y)
        if new > term:  # asymptotic series started diverging
            break
        term = new
        s += term
        if term < 1e-18 * s:
            break
    return math.exp(y) / math.sqrt(2.0 * math.pi * y) * s


def _i0_loop(y, out):
    for i in range(y.shape[0]):
        out[i] = _i0_scalar(y[i])
    return out


if HAVE_NUMBA:
    _i0_scalar_jit = _njit(cache=True)(_i0_scalar)

    @_njit(cache=True)
    def _i0_loop_jit(y, out):
        for i in range(y.shape[0]):
            out[i] = _i0_scalar_jit(y[i])
        return out
else:
    _i0_scalar_jit = _i0_scalar
    _i0_loop_jit = None


def bessel_i0_numpy(y: np.ndarray) -> np.ndarray:
    """Vectorized fallback: fixed-length series / asymptotic sums."""
    y = np.asarray(y, dtype=np.float64)
    out = np.empty_like(y)
    lo = y <= I0_SERIES_CUT
    if np.any(lo):
        q = 0.25 * y[lo] * y[lo]
        s = np.ones_like(q)
        term = np.ones_like(q)
        for k in range(1, 60):
            term = term * q / (k * k)
            s += term
        out[lo] = s
    hi = ~lo
    if np.any(hi):
        z = y[hi]
        s = np.ones_like(z)
        term = np.ones_like(z)
        for k in range(1, 19):
            term = term * (2.0 * k - 1.0) ** 2 / (8.0 * k * z)
            s += term
        out[hi] = np.exp(z) / np.sqrt(2.0 * np.pi * z) * s
    return out


def bessel_i0_kernel(y: np.ndarray) -> np.ndarray:
    y = np.ascontiguousarray(y, dtype=np.float64)
    if HAVE_NUMBA:
        return _i0_loop_jit(y, np.empty_like(y))
    return bessel_i0_numpy(y)


# ----------------------------------------------------------------------
# Bessel-kernel convolution quadrature for S(t)
#
# out[i] = sum_q wk[q] * cubic-interpolation of fu at fine index i*R - s_q,
# where fu is f spectrally upsampled by R and wk folds Simpson weight,
# kernel value and the e^{-t/2}/2 prefactor.  shift_q = m_q - rho_q with
# m_q integer, rho_q in [0,1); lag[q, 0:4] are the cubic Lagrange weights.
# ----------------------------------------------------------------------


def _kernel_convolve_loop(fu, wk, mq, lag, R, n_out):
    nf = fu.shape[0]
    nq = wk.shape[0]
    out = np.zeros(n_out)
    for i in range(n_out):
        base = i * R
        acc = 0.0
        for q in range(nq):
            b = base - mq[q]
            acc += wk[q] * (
                lag[q, 0] * fu[(b - 1) % nf]
                + lag[q, 1] * fu[b % nf]
                + lag[q, 2] * fu[(b + 1) % nf]
                + lag[q, 3] * fu[(b + 2) % nf]
            )
        out[i] = acc
    return out


kernel_convolve_numba = _maybe_jit(_kernel_convolve_loop) if HAVE_NUMBA else None


def kernel_convolve_numpy(fu, wk, mq, lag, R, n_out):
    nf = fu.shape[0]
    base = np.arange(n_out) * R
    out = np.zeros(n_out)
    for q in range(wk.shape[0]):
        b = base - mq[q]
        out += wk[q] * (
            lag[q, 0] * fu[(b - 1) % nf]
            + lag[q, 1] * fu[b % nf]
            + lag[q, 2] * fu[(b + 1) % nf]
            + lag[q, 3] * fu[(b + 2) % nf]
        )
    return out


def kernel_convolve(fu, wk, mq, lag, R, n_out):
    if kernel_convolve_numba is not None:
        return kernel_convolve_numba(fu, wk, mq, lag, R, n_out)
    return kernel_convolve_numpy(fu, wk, mq, lag, R, n_out)


# ----------------------------------------------------------------------
# memory-kernel ODI march
#
# v(t) = seed + t^gamma * [ c1 * int_{t-1}^t (t-tau) F + c2 * int_{t0}^{t-1} F ],
# F(tau) = v(tau)^p tau^{-beta}, trapezoidal quadrature on a uniform grid
# with dt = 1/m.  Rolling sums keep each step O(1):
#   A = trapz of F over the active window, current node excluded
#   B = same with integrand tau*F
#   C = trapz of F over [t0, t-1]
# The (t - tau) weight never sees the current node (zero factor), so the
# update is explicit.  Returns (v array, number of steps filled, blow index).
# ----------------------------------------------------------------------


def _odi_march_loop(seed, p, beta, gamma, c1, c2, t0, dt, m, n_max,
                    blow_level, growth_limit):
    v = np.empty(n_max)
    f = np.empty(n_max)
    v[0] = seed
    f[0] = seed ** p * t0 ** (-beta)
    A = 0.0
    B = 0.0
    C = 0.0
    blow = -1
    n = 1
    for k in range(1, n_max):
        t = t0 + k * dt
        if k <= m:
            wgt = 0.5 if k == 1 else 1.0
            A += dt * wgt * f[k - 1]
            B += dt * wgt * (t0 + (k - 1) * dt) * f[k - 1]
        else:
            A += dt * (f[k - 1] - 0.5 * f[k - 1 - m] - 0.5 * f[k - m])
            B += dt * ((t0 + (k - 1) * dt) * f[k - 1]
                       - 0.5 * (t0 + (k - 1 - m) * dt) * f[k - 1 - m]
                       - 0.5 * (t0 + (k - m) * dt) * f[k - m])
            C += dt * 0.5 * (f[k - 1 - m] + f[k - m])
        grow = t ** gamma if gamma != 0.0 else 1.0
        vk = seed + grow * (c1 * (t * A - B) + c2 * C)
        v[k] = vk
        f[k] = vk ** p * t ** (-beta)
        n = k + 1
        if vk >= blow_level or vk > growth_limit * v[k - 1]:
            blow = k
            break
    return v, n, blow


odi_march_numba = _maybe_jit(_odi_march_loop) if HAVE_NUMBA else None
odi_march_numpy = _odi_march_loop  # inherently sequential; fallback runs the same loop in python


def odi_march(seed, p, beta, gamma, c1, c2, t0, dt, m, n_max,
              blow_level, growth_limit):
    args = (float(seed), float(p), float(beta), float(gamma), float(c1),
            float(c2), float(t0), float(dt), int(m), int(n_max),
            float(blow_level), float(growth_limit))
    if odi_march_numba is not None:
        return odi_march_numba(*args)
    return odi_march_numpy(*args)
