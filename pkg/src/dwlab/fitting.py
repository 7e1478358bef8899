"""Scaling-exponent estimation on log-log data and the critical-case fit."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from .special import lambert_w0

__all__ = ["ExponentFit", "fit_loglog", "fit_critical_lifespan", "critical_lifespan_model"]

R2_ACCEPT = 0.98


@dataclass(frozen=True)
class ExponentFit:
    """Least-squares power law y = exp(intercept) * x^slope over a window."""

    slope: float
    intercept: float
    r_squared: float
    window: tuple
    accepted: bool

    def predict(self, x):
        return np.exp(self.intercept) * np.asarray(x, dtype=float) ** self.slope


def fit_loglog(x, y, window=None, r2_min: float = R2_ACCEPT) -> ExponentFit:
    """Fit log y against log x by least squares.

    Non-positive samples are dropped.  window = (lo, hi) restricts the fit to
    lo <= x <= hi; by default the largest decade [max(x)/10, max(x)] is used.
    The fit is flagged unaccepted when r^2 < r2_min or fewer than 3 points
    survive the masking.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    mask = (x > 0) & (y > 0) & np.isfinite(x) & np.isfinite(y)
    if window is None:
        hi = np.max(x[mask]) if np.any(mask) else 1.0
        window = (hi / 10.0, hi)
    lo, hi = float(window[0]), float(window[1])
    mask &= (x >= lo) & (x <= hi)
    xm, ym = np.log(x[mask]), np.log(y[mask])
    if len(xm) < 3:
        return ExponentFit(math.nan, math.nan, 0.0, (lo, hi), False)
    slope, intercept = np.polyfit(xm, ym, 1)
    resid = ym - (slope * xm + intercept)
    ss_res = float(np.sum(resid ** 2))
    ss_tot = float(np.sum((ym - np.mean(ym)) ** 2))
    r2 = 0.0 if ss_tot <= 1e-300 else max(0.0, 1.0 - ss_res / ss_tot)
    return ExponentFit(float(slope), float(intercept), min(r2, 1.0), (lo, hi),
                       bool(r2 >= r2_min))


def critical_lifespan_model(eps, A: float, B: float):
    """T(eps) = A * eps^{-2/3} * exp(2 W(B eps^{-1/2}) / 3)."""
    eps = np.asarray(eps, dtype=float)
    return A * eps ** (-2.0 / 3.0) * np.exp(2.0 * lambert_w0(B / np.sqrt(eps)) / 3.0)


def fit_critical_lifespan(eps, T):
    """Two-parameter fit of the p = 3/2 law T * eps^{2/3} = A exp(2 W(B eps^{-1/2})/3).

    B is found by a bounded 1-D search in log B (A is closed-form at fixed B,
    the model being linear in log A).  Returns (A, B, r_squared).
    """
    eps = np.asarray(eps, dtype=float)
    T = np.asarray(T, dtype=float)
    y = np.log(T) + (2.0 / 3.0) * np.log(eps)
    x = 1.0 / np.sqrt(eps)

    def sse(logB):
        w = (2.0 / 3.0) * lambert_w0(math.exp(logB) * x)
        logA = float(np.mean(y - w))
        return float(np.sum((y - logA - w) ** 2))

    res = minimize_scalar(sse, bounds=(-15.0, 15.0), method="bounded",
                          options={"xatol": 1e-10})
    B = math.exp(res.x)
    w = (2.0 / 3.0) * lambert_w0(B * x)
    A = math.exp(float(np.mean(y - w)))
    # score the fit on log T itself, not on the detrended variable y,
    # so that a near-power-law data set is not penalized for its trend
    logT = np.log(T)
    ss_res = sse(res.x)  # same residuals either way; the trend cancels
    ss_tot = float(np.sum((logT - np.mean(logT)) ** 2))
    r2 = 1.0 if ss_tot <= 1e-300 else max(0.0, 1.0 - ss_res / ss_tot)
    return A, B, min(r2, 1.0)
