"""Linear propagators for u_tt + u_t - u_xx = 0 and their comparison operators.

S(t) denotes the solution operator with S(0) = 0, dS/dt(0) = Id.  Its Fourier
symbol is

    sigma(t, xi) = e^{-t/2} sinh(t mu)/mu,  mu = sqrt(1/4 - xi^2),  |xi| < 1/2,
    sigma(t, xi) = e^{-t/2} sin(t nu)/nu,   nu = sqrt(xi^2 - 1/4),  |xi| > 1/2,

with the removable seam at |xi| = 1/2 handled by a short Taylor series.  A
free solution with data (u0, u1) is u(t) = S(t)(u0 + u1) + dS/dt(t) u0.  The
physical-space form of S(t) is the light-cone Bessel average

    S(t)f(x) = e^{-t/2} * (1/2) * int_{-t}^{t} I0(sqrt(t^2 - y^2)/2) f(x - y) dy,

whose total mass is 1 - e^{-t}.  Heat and wave comparison operators share the
same grid conventions so residuals can be formed directly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .fitting import ExponentFit, fit_loglog
from .grid import GridFunction, GridSpec, lp_norm

__all__ = [
    "TruncationError",
    "KernelRangeError",
    "PropagatorSymbol",
    "damped_symbol",
    "linear_pair_matrix",
    "apply_S",
    "apply_dtS",
    "apply_S_kernel",
    "apply_heat",
    "apply_wave",
    "DecayReport",
    "decay_scan",
    "residual_scan",
    "HEAT_EXPANSION_SLOPES",
    "PRINTED_SLOPES",
]


class TruncationError(ValueError):
    """Input does not decay at the domain boundary; periodic images would pollute."""


class KernelRangeError(ValueError):
    """Kernel quadrature requested outside its supported time range."""


_SEAM_Z = 0.1  # switch to the Taylor series when |t| * sqrt(|1/4 - xi^2|) < this


def _symbol_pair(t: float, xi: np.ndarray):
    """(sigma, d sigma/dt) at time t on an arbitrary wavenumber array."""
    t = float(t)
    if t < 0.0:
        raise ValueError("t must be >= 0")
    w = 0.25 - xi * xi
    sigma = np.empty_like(xi)
    sigma_t = np.empty_like(xi)

    z = t * np.sqrt(np.abs(w))
    seam = z < _SEAM_Z
    hyp = (w > 0.0) & ~seam
    trig = (w < 0.0) & ~seam

    if np.any(seam):
        # sinh(t mu)/mu and cosh(t mu) are entire in w = mu^2; six terms of
        # the Taylor series in w t^2 are exact to 1e-16 for |z| < 0.1
        q = w[seam] * t * t
        s = np.zeros_like(q)   # sinh(t mu)/(t mu)
        c = np.zeros_like(q)   # cosh(t mu)
        qk = np.ones_like(q)
        for m in range(6):
            s += qk / math.factorial(2 * m + 1)
            c += qk / math.factorial(2 * m)
            qk = qk * q
        damp = math.exp(-0.5 * t)
        sigma[seam] = damp * t * s
        sigma_t[seam] = damp * c - 0.5 * sigma[seam]

    if np.any(hyp):
        mu = np.sqrt(w[hyp])
        # e^{-t/2} folded into the exponentials keeps everything in [0, 1]
        ep = np.exp(t * (mu - 0.5))
        em = np.exp(-t * (mu + 0.5))
        sig = (ep - em) / (2.0 * mu)
        sigma[hyp] = sig
        sigma_t[hyp] = 0.5 * (ep + em) - 0.5 * sig

    if np.any(trig):
        nu = np.sqrt(-w[trig])
        damp = math.exp(-0.5 * t)
        sig = damp * np.sin(t * nu) / nu
        sigma[trig] = sig
        sigma_t[trig] = damp * np.cos(t * nu) - 0.5 * sig

    return sigma, sigma_t


@dataclass(frozen=True)
class PropagatorSymbol:
    """sigma and d sigma/dt sampled on the real-FFT wavenumbers of a grid."""

    t: float
    freqs: np.ndarray
    sigma: np.ndarray
    sigma_t: np.ndarray


def damped_symbol(t: float, spec: GridSpec) -> PropagatorSymbol:
    xi = spec.freqs
    sigma, sigma_t = _symbol_pair(t, xi)
    return PropagatorSymbol(float(t), xi, sigma, sigma_t)


def linear_pair_matrix(t: float, spec: GridSpec):
    """Exact propagator of the first-order system (u, u_t) in Fourier space.

    Returns (m11, m12, m21, m22) with u(t)^ = m11 u0^ + m12 u1^ and
    u_t(t)^ = m21 u0^ + m22 u1^.
    """
    xi = spec.freqs
    sigma, sigma_t = _symbol_pair(t, xi)
    return (sigma_t + sigma, sigma, -(xi * xi) * sigma, sigma_t)


def _check_boundary(f: GridFunction, tol: float = 1e-12) -> None:
    v = f.values
    scale = float(np.max(np.abs(v)))
    if scale == 0.0:
        return
    edge = max(abs(v[0]), abs(v[-1]))
    if edge > tol * scale:
        raise TruncationError(
            f"boundary value {edge:.3e} exceeds {tol:.0e} * max|f| = {tol * scale:.3e}; "
            "enlarge the domain")


def _apply_multiplier(f: GridFunction, mult: np.ndarray) -> GridFunction:
    out = np.fft.irfft(np.fft.rfft(f.values) * mult, n=f.spec.points)
    return GridFunction(f.spec, out)


def apply_S(t: float, f: GridFunction, check_boundary: bool = True) -> GridFunction:
    """S(t) f via the Fourier multiplier."""
    if check_boundary:
        _check_boundary(f)
    return _apply_multiplier(f, damped_symbol(t, f.spec).sigma)


def apply_dtS(t: float, f: GridFunction, check_boundary: bool = True) -> GridFunction:
    """dS/dt (t) f via the Fourier multiplier; equals f at t = 0."""
    if check_boundary:
        _check_boundary(f)
    return _apply_multiplier(f, damped_symbol(t, f.spec).sigma_t)


def apply_heat(t: float, f: GridFunction) -> GridFunction:
    """Heat semigroup e^{t Lap} f via the multiplier e^{-t xi^2}."""
    if t < 0.0:
        raise ValueError("t must be >= 0")
    xi = f.spec.freqs
    return _apply_multiplier(f, np.exp(-t * xi * xi))


def apply_wave(t: float, f: GridFunction) -> GridFunction:
    """Sliding window W(t)f(x) = (1/2) int_{x-t}^{x+t} f(y) dy.

    Midpoint-rule cumulative sum with linear interpolation between the
    half-grid breakpoints; exact for constant f.
    """
    if t < 0.0:
        raise ValueError("t must be >= 0")
    spec = f.spec
    h, N, L = spec.h, spec.points, spec.half_width
    total = h * float(np.sum(f.values))
    # cumulative integral at cell edges x_j + h/2 (midpoint rule per cell)
    edges_val = np.concatenate([[0.0], np.cumsum(f.values) * h])

    def cumulative(pos):
        # integral of the periodized f from the left edge -L - h/2 to pos
        rel = (pos - (-L - 0.5 * h))
        wraps = np.floor(rel / (2.0 * L))
        frac = rel - wraps * 2.0 * L
        idx = np.minimum((frac / h).astype(int), N - 1)
        local = edges_val[idx] + (frac - idx * h) * f.values[idx]
        return wraps * total + local

    x = spec.nodes
    return GridFunction(spec, 0.5 * (cumulative(x + t) - cumulative(x - t)))


# ----------------------------------------------------------------------
# physical-space Bessel kernel for S(t)
# ----------------------------------------------------------------------

_KERNEL_T_MAX = 50.0
_UPSAMPLE = 8


def _cubic_lagrange_weights(r: np.ndarray) -> np.ndarray:
    """Cubic Lagrange weights on taps (-1, 0, 1, 2) evaluated at r in [0, 1)."""
    w = np.empty((len(r), 4))
    w[:, 0] = -r * (r - 1.0) * (r - 2.0) / 6.0
    w[:, 1] = (r + 1.0) * (r - 1.0) * (r - 2.0) / 2.0
    w[:, 2] = -(r + 1.0) * r * (r - 2.0) / 2.0
    w[:, 3] = (r + 1.0) * r * (r - 1.0) / 6.0
    return w


def _upsample(values: np.ndarray, R: int) -> np.ndarray:
    """Band-limited upsampling by an integer factor via rfft zero padding."""
    n = len(values)
    fh = np.fft.rfft(values)
    fh[-1] *= 0.5  # split the coarse Nyquist bin across +/- modes
    return np.fft.irfft(fh, n=R * n) * R


def kernel_quadrature(t: float, h: float, nodes_per_cell: int = 8):
    """Simpson nodes and weights on [-t, t] with spacing <= h/nodes_per_cell.

    Returns (y nodes, weights including kernel values and the e^{-t/2}/2
    prefactor), so that sum(w * f(x - y)) approximates S(t)f(x).
    """
    n_iv = 2 * max(4, math.ceil(nodes_per_cell * t / (2.0 * h)) * 2)
    hq = 2.0 * t / n_iv
    y = -t + hq * np.arange(n_iv + 1)
    w = np.full(n_iv + 1, 2.0)
    w[1::2] = 4.0
    w[0] = w[-1] = 1.0
    w *= hq / 3.0
    # I0 argument as sqrt((t-y)(t+y))/2: no cancellation near |y| = t
    arg = 0.5 * np.sqrt(np.maximum((t - y) * (t + y), 0.0))
    kv = _kernels.bessel_i0_kernel(arg)
    return y, 0.5 * math.exp(-0.5 * t) * w * kv


def apply_S_kernel(t: float, f: GridFunction, nodes_per_cell: int = 8) -> GridFunction:
    """S(t) f by direct light-cone quadrature of the Bessel kernel.

    Composite Simpson in y with at least `nodes_per_cell` nodes per grid cell
    (endpoints land exactly on +/- t); f is evaluated off-grid by cubic
    interpolation of its 8x band-limited upsampling.  Supported for
    0 < t <= 50; beyond that the kernel dynamic range makes the quadrature
    pointless and KernelRangeError is raised.
    """
    t = float(t)
    if not (0.0 < t <= _KERNEL_T_MAX):
        raise KernelRangeError(f"kernel quadrature supports 0 < t <= {_KERNEL_T_MAX}, got {t}")
    spec = f.spec
    if 2.0 * t > 2.0 * spec.half_width:
        raise KernelRangeError("light cone wider than the periodic cell")
    y, wk = kernel_quadrature(t, spec.h, nodes_per_cell)

    R = _UPSAMPLE
    hf = spec.h / R
    fu = _upsample(f.values, R)
    s = y / hf                      # shift in fine-grid units
    mq = np.ceil(s).astype(np.int64)
    rho = mq - s                    # in [0, 1)
    lag = _cubic_lagrange_weights(rho)
    out = _kernels.kernel_convolve(fu, np.ascontiguousarray(wk), mq,
                                   np.ascontiguousarray(lag), R, spec.points)
    return GridFunction(spec, out)


# ----------------------------------------------------------------------
# decay and residual scans
# ----------------------------------------------------------------------

# target slopes for ||S(t) f||_{L^p} with f = g, g', g'' in L^1:
# heat-expansion rates -1/(2p') - k/2, and the looser printed convention
# -1/p' - k/2 kept alongside for comparison.
def HEAT_EXPANSION_SLOPES(p: float):
    a = (p - 1.0) / (2.0 * p)
    return (-a, -a - 0.5, -a - 1.0)


def PRINTED_SLOPES(p: float):
    a = (p - 1.0) / p
    return (-a, -a - 0.5, -a - 1.0)


@dataclass(frozen=True)
class DecayReport:
    times: np.ndarray
    norms: np.ndarray
    p: float
    fit: ExponentFit
    label: str = ""

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("t,norm\n")
            for t, v in zip(self.times, self.norms):
                fh.write(f"{t:.17g},{v:.17g}\n")

    def fit_record(self) -> dict:
        return {
            "p": self.p,
            "slope": self.fit.slope,
            "intercept": self.fit.intercept,
            "r2": self.fit.r_squared,
            "window": list(self.fit.window),
            "label": self.label,
        }


def decay_scan(f: GridFunction, p: float, times, window=None, label: str = "") -> DecayReport:
    """||S(t) f||_{L^p} over the given times with a log-log fit."""
    times = np.asarray(times, dtype=float)
    norms = np.array([lp_norm(apply_S(t, f), p) for t in times])
    return DecayReport(times, norms, float(p), fit_loglog(times, norms, window), label)


def residual_scan(f: GridFunction, p: float, times, variant: str = "heat",
                  window=None, label: str = "") -> DecayReport:
    """Decay of S(t)f minus its parabolic (and optionally wave) approximation.

    variant "heat": ||S(t)f - e^{t Lap} f||_{L^p};
    variant "heat_plus_wave": additionally subtracts e^{-t/2} W(t) f.
    """
    if variant not in ("heat", "heat_plus_wave"):
        raise ValueError(f"unknown variant {variant!r}")
    times = np.asarray(times, dtype=float)
    norms = np.empty_like(times)
    for i, t in enumerate(times):
        r = apply_S(t, f) - apply_heat(t, f)
        if variant == "heat_plus_wave":
            damp = math.exp(-0.5 * t) if t < 1400.0 else 0.0
            if damp > 0.0:
                r = r - apply_wave(t, f) * damp
        norms[i] = lp_norm(r, p)
    return DecayReport(times, norms, float(p), fit_loglog(times, norms, window),
                       label or variant)
