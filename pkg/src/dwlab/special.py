"""Special functions and closed-form lifespan laws.

Covers the modified Bessel function I0 (series / asymptotic split at y = 20),
the principal Lambert W branch on [0, inf), the Gaussian derivative data
families g, g', g'' with their moment classes, the lifespan predictions for
each moment regime, and the threshold time root tilde_T2p.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .grid import GridFunction, GridSpec

__all__ = [
    "HorizonError",
    "bessel_i0",
    "lambert_w0",
    "gaussian_derivative",
    "DataFamily",
    "MOMENT_CLASSES",
    "M0_NONZERO",
    "M0_ZERO_M1_NONZERO",
    "M0_M1_ZERO",
    "ZERO_SUM",
    "make_data_family",
    "LifespanPrediction",
    "predict_lifespan",
    "predicted_exponent",
    "tilde_T2p",
    "tilde_T2p_closed_form",
]


class HorizonError(ValueError):
    """The requested root or horizon does not exist in the admissible range."""


# ----------------------------------------------------------------------
# modified Bessel I0
# ----------------------------------------------------------------------

def bessel_i0(y):
    """I0(y) for y >= 0, scalar or array; relative error <= 1e-12.

    Power series sum_k (y/2)^{2k} / (k!)^2 up to y = 20, then the asymptotic
    expansion e^y / sqrt(2 pi y) * (1 + 1/(8y) + 9/(128 y^2) + ...).
    """
    arr = np.asarray(y, dtype=np.float64)
    if np.any(arr < 0.0):
        raise ValueError("bessel_i0 requires y >= 0")
    if arr.ndim == 0:
        return float(_kernels._i0_scalar_jit(float(arr)))
    return _kernels.bessel_i0_kernel(np.ascontiguousarray(arr))


# ----------------------------------------------------------------------
# Lambert W, principal branch on [0, inf)
# ----------------------------------------------------------------------

def lambert_w0(z):
    """Principal-branch W(z) for z >= 0 via Halley iteration from log(1+z).

    Converges to |W e^W - z| <= 1e-13 * max(1, z).
    """
    arr = np.asarray(z, dtype=np.float64)
    scalar = arr.ndim == 0
    arr = np.atleast_1d(arr).copy()
    if np.any(arr < 0.0):
        raise ValueError("lambert_w0 requires z >= 0")
    w = np.log1p(arr)
    for _ in range(100):
        ew = np.exp(w)
        resid = w * ew - arr
        if np.all(np.abs(resid) <= 1e-13 * np.maximum(1.0, arr)):
            break
        w1 = w + 1.0
        # Halley step, guarded against the w = -1 pole (never hit for z >= 0)
        w = w - resid / (ew * w1 - (w + 2.0) * resid / (2.0 * w1))
    if scalar:
        return float(w[0])
    return w


# ----------------------------------------------------------------------
# Gaussian-derivative data families
# ----------------------------------------------------------------------

def _gauss_profile(j: int, x: np.ndarray) -> np.ndarray:
    g = np.exp(-0.25 * x * x)
    if j == 0:
        return g
    if j == 1:
        return -0.5 * x * g
    if j == 2:
        return (0.25 * x * x - 0.5) * g
    if j == 3:
        return (0.75 * x - 0.125 * x ** 3) * g
    raise ValueError(f"gaussian derivative order must be 0..3, got {j}")


def gaussian_derivative(j: int, spec: GridSpec) -> GridFunction:
    """j-th derivative of g(x) = exp(-x^2/4) sampled on the grid, j = 0..3."""
    return GridFunction(spec, _gauss_profile(int(j), spec.nodes))


M0_NONZERO = "M0_nonzero"
M0_ZERO_M1_NONZERO = "M0_zero_M1_nonzero"
M0_M1_ZERO = "M0_M1_zero"
ZERO_SUM = "zero_sum"

MOMENT_CLASSES = (M0_NONZERO, M0_ZERO_M1_NONZERO, M0_M1_ZERO)


@dataclass(frozen=True)
class DataFamily:
    """Unit-amplitude data pair (f0, f1) plus a default amplitude epsilon.

    f0 and f1 are stored at profile scale; moments quoted for a family
    refer to these unscaled profiles.  The fields actually handed to a
    solver are epsilon * (f0, f1), built by initial_data().  A family
    with epsilon == 0 is degenerate: its effective data vanish.
    """

    f0: GridFunction
    f1: GridFunction
    moment_class: str
    label: str
    epsilon: float
    degenerate: bool = False

    def initial_data(self, epsilon=None):
        """Return (u0, u1) = eps * (f0, f1), eps defaulting to self.epsilon."""
        eps = self.epsilon if epsilon is None else float(epsilon)
        if eps < 0.0:
            raise ValueError("epsilon must be >= 0")
        return self.f0 * eps, self.f1 * eps


def make_data_family(kind: str, epsilon: float, spec: GridSpec) -> DataFamily:
    """Build the canonical unit-profile family for a moment class.

    kinds: "M0_nonzero" -> (g, 0); "M0_zero_M1_nonzero" -> (g', 0);
    "M0_M1_zero" -> (g'', 0); "zero_sum" -> (g, -g), the u0 + u1 = 0 pair
    (all moments of the sum vanish, so its moment class is M0_M1_zero).
    epsilon is recorded as the family's default amplitude; the profiles
    themselves stay at unit scale.
    """
    eps = float(epsilon)
    if eps < 0.0:
        raise ValueError("epsilon must be >= 0")
    zero = GridFunction(spec, np.zeros(spec.points))
    if kind == M0_NONZERO:
        fam = (gaussian_derivative(0, spec), zero, M0_NONZERO)
    elif kind == M0_ZERO_M1_NONZERO:
        fam = (gaussian_derivative(1, spec), zero, M0_ZERO_M1_NONZERO)
    elif kind == M0_M1_ZERO:
        fam = (gaussian_derivative(2, spec), zero, M0_M1_ZERO)
    elif kind == ZERO_SUM:
        g = gaussian_derivative(0, spec)
        fam = (g, g * (-1.0), M0_M1_ZERO)
    else:
        raise ValueError(f"unknown data family kind {kind!r}")
    return DataFamily(fam[0], fam[1], fam[2], label=kind, epsilon=eps,
                      degenerate=(eps == 0.0))


# ----------------------------------------------------------------------
# lifespan predictions
# ----------------------------------------------------------------------

SUBCRITICAL_M1 = "subcritical_M1"
CRITICAL_M1 = "critical_M1"
GENERIC = "generic"


@dataclass(frozen=True)
class LifespanPrediction:
    regime: str
    value: float
    formula_text: str


def _t1p(eta: float, p: float) -> float:
    """T_{1,p}(eta): eta^{-2(p-1)/(3-p)} for p < 3, exp(eta^{-2}) at p = 3."""
    if abs(p - 3.0) < 1e-12:
        return math.exp(eta ** (-2.0))
    return eta ** (-2.0 * (p - 1.0) / (3.0 - p))


def _is_critical(p: float) -> bool:
    return abs(p - 1.5) < 1e-12


def predict_lifespan(p: float, eps: float, moment_class: str,
                     constants: tuple = (1.0, 1.0)) -> LifespanPrediction:
    """Predicted lifespan for small data of size eps in the given moment class.

    With M0 = 0 the three regimes are: p < 3/2 and M1 != 0 gives
    c * eps^{-(p-1)/(2-p)}; p = 3/2 and M1 != 0 gives
    c * eps^{-2/3} * exp(2 W(c eps^{-1/2}) / 3); otherwise T_{1,p}(c eps^p).
    Data with M0 != 0 follows the classical law T_p(c eps) instead
    (same exponent family applied to eps rather than eps^p).
    """
    p = float(p)
    eps = float(eps)
    if not (1.0 < p <= 3.0):
        raise ValueError(f"p must lie in (1, 3], got {p}")
    if eps <= 0.0:
        raise ValueError("eps must be positive")
    c = float(constants[0])

    if moment_class == M0_NONZERO:
        return LifespanPrediction(GENERIC, _t1p(c * eps, p), "T_p(c*eps)")
    if moment_class in (M0_M1_ZERO, ZERO_SUM):
        return LifespanPrediction(GENERIC, _t1p(c * eps ** p, p), "T_p(c*eps^p)")
    if moment_class != M0_ZERO_M1_NONZERO:
        raise ValueError(f"unknown moment class {moment_class!r}")

    if _is_critical(p):
        val = c * eps ** (-2.0 / 3.0) * math.exp(2.0 * lambert_w0(c / math.sqrt(eps)) / 3.0)
        return LifespanPrediction(CRITICAL_M1, val,
                                  "c*eps^(-2/3)*exp(2W(c*eps^(-1/2))/3)")
    if p < 1.5:
        return LifespanPrediction(SUBCRITICAL_M1, c * eps ** (-(p - 1.0) / (2.0 - p)),
                                  "c*eps^(-(p-1)/(2-p))")
    return LifespanPrediction(GENERIC, _t1p(c * eps ** p, p), "T_p(c*eps^p)")


def predicted_exponent(p: float, moment_class: str):
    """log-log slope of the predicted lifespan in eps, or None when not a pure power."""
    p = float(p)
    if moment_class == M0_NONZERO:
        if abs(p - 3.0) < 1e-12:
            return None
        return -2.0 * (p - 1.0) / (3.0 - p)
    if moment_class == M0_ZERO_M1_NONZERO:
        if _is_critical(p):
            return None
        if p < 1.5:
            return -(p - 1.0) / (2.0 - p)
    if abs(p - 3.0) < 1e-12:
        return None
    return -2.0 * p * (p - 1.0) / (3.0 - p)


# ----------------------------------------------------------------------
# threshold time tilde_T2p
# ----------------------------------------------------------------------

def _tilde_lhs(T: float, p: float) -> float:
    """(T+1)^{1/2} * int_0^T (1+t)^{-(2p-1)/2} dt, closed-form integral."""
    a = (2.0 * p - 1.0) / 2.0
    if abs(a - 1.0) < 1e-12:
        integral = math.log1p(T)
    else:
        integral = ((1.0 + T) ** (1.0 - a) - 1.0) / (1.0 - a)
    return math.sqrt(T + 1.0) * integral


def tilde_T2p(p: float, eps: float, C: float = 1.0) -> float:
    """Root T > 1 of (T+1)^{1/2} int_0^T (1+t)^{-(2p-1)/2} dt = C eps^{-(p-1)}.

    Bracketed bisection on the monotone left-hand side; raises HorizonError
    when the root falls at or below T = 1 (eps too large for the regime).
    """
    p = float(p)
    eps = float(eps)
    C = float(C)
    if not (1.0 < p <= 3.0):
        raise ValueError(f"p must lie in (1, 3], got {p}")
    if eps <= 0.0 or C <= 0.0:
        raise ValueError("eps and C must be positive")
    rhs = C * eps ** (-(p - 1.0))
    if _tilde_lhs(1.0, p) >= rhs:
        raise HorizonError(
            f"threshold equation has no root above T = 1 for p={p}, eps={eps}, C={C}")
    lo, hi = 1.0, 2.0
    while _tilde_lhs(hi, p) < rhs:
        hi *= 4.0
        if hi > 1e30:
            raise HorizonError("threshold root exceeds 1e30; eps is too small to bracket")
    while hi - lo > 1e-13 * hi:
        mid = 0.5 * (lo + hi)
        if _tilde_lhs(mid, p) < rhs:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def tilde_T2p_closed_form(p: float, eps: float, C: float = 1.0) -> float:
    """Leading-order closed forms for the threshold root.

    p > 3/2: C eps^{-2(p-1)}; p < 3/2: C eps^{-(p-1)/(2-p)}.  At p = 3/2 the
    defining equation sqrt(T+1) log(T+1) = C eps^{-1/2} is solved exactly by
    T + 1 = exp(2 W(C eps^{-1/2} / 2)); the factor 2 inside W is required for
    the root to match (it is usually absorbed into the free constant).
    """
    p = float(p)
    if _is_critical(p):
        return math.exp(2.0 * lambert_w0(0.5 * C * eps ** -0.5)) - 1.0
    if p > 1.5:
        return C * eps ** (-2.0 * (p - 1.0))
    return C * eps ** (-(p - 1.0) / (2.0 - p))
