"""Uniform periodic grids and the measurement layer built on them.

Everything in the package lives on a truncated torus [-L, L) sampled at N
equispaced nodes.  This module owns the grid description, sampled functions,
trapezoidal quadrature, spectral derivatives, moment functionals and the
weighted space-time norms used to monitor global solutions.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "GridError",
    "MomentOrderError",
    "GridSpec",
    "GridFunction",
    "MomentVector",
    "Trajectory",
    "make_grid",
    "grid_for_horizon",
    "lp_norm",
    "spectral_derivative",
    "sobolev_norm",
    "moment",
    "moments",
    "weighted_norm",
]


class GridError(ValueError):
    """Invalid grid construction or incompatible grid operands."""


class MomentOrderError(ValueError):
    """Moment order too high to trust on a truncated domain."""


@dataclass(frozen=True)
class GridSpec:
    """Periodic grid on [-L, L) with N nodes, x_j = -L + j*h, h = 2L/N."""

    half_width: float
    points: int

    def __post_init__(self):
        L = float(self.half_width)
        N = int(self.points)
        if not math.isfinite(L) or L <= 0.0:
            raise GridError(f"half_width must be positive and finite, got {self.half_width}")
        if N < 16 or (N & (N - 1)) != 0:
            raise GridError(f"points must be a power of two >= 16, got {self.points}")
        object.__setattr__(self, "half_width", L)
        object.__setattr__(self, "points", N)

    @property
    def h(self) -> float:
        return 2.0 * self.half_width / self.points

    @property
    def nodes(self) -> np.ndarray:
        return -self.half_width + self.h * np.arange(self.points)

    @property
    def freqs(self) -> np.ndarray:
        """Real-FFT wavenumbers xi_k = pi*k/L, k = 0..N/2."""
        return 2.0 * np.pi * np.fft.rfftfreq(self.points, d=self.h)


def make_grid(half_width: float, points: int) -> GridSpec:
    """Validated GridSpec constructor."""
    return GridSpec(half_width, points)


def grid_for_horizon(horizon: float, data_radius: float, h_target: float,
                     mode: str = "wavefront") -> GridSpec:
    """Pick a grid large enough for a run up to time `horizon`.

    mode "wavefront" uses the hard finite-speed bound L >= horizon + radius;
    mode "heat" uses the softer L >= 20*sqrt(horizon) + radius, adequate once
    the exponentially damped fronts are below roundoff (t >> 70).
    """
    if mode == "wavefront":
        need = horizon + data_radius
    elif mode == "heat":
        need = 20.0 * math.sqrt(max(horizon, 1.0)) + data_radius
    else:
        raise GridError(f"unknown sizing mode {mode!r}")
    n = 16
    while n * h_target < 2.0 * need:
        n *= 2
    return GridSpec(n * h_target / 2.0, n)


@dataclass(frozen=True)
class GridFunction:
    """Real samples of a function on a GridSpec; immutable after construction."""

    spec: GridSpec
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.shape != (self.spec.points,):
            raise GridError(f"values shape {v.shape} does not match grid with N={self.spec.points}")
        if not np.all(np.isfinite(v)):
            raise GridError("values must be finite")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    # small amount of arithmetic sugar so data construction reads naturally
    def __add__(self, other: "GridFunction") -> "GridFunction":
        self._check_same_grid(other)
        return GridFunction(self.spec, self.values + other.values)

    def __sub__(self, other: "GridFunction") -> "GridFunction":
        self._check_same_grid(other)
        return GridFunction(self.spec, self.values - other.values)

    def __mul__(self, c: float) -> "GridFunction":
        return GridFunction(self.spec, self.values * float(c))

    __rmul__ = __mul__

    def __neg__(self) -> "GridFunction":
        return GridFunction(self.spec, -self.values)

    def _check_same_grid(self, other: "GridFunction") -> None:
        if self.spec != other.spec:
            raise GridError("operands live on different grids")

    def to_csv(self, path) -> None:
        x = self.spec.nodes
        with open(path, "w") as fh:
            fh.write("x,value\n")
            for xi, vi in zip(x, self.values):
                fh.write(f"{xi:.17g},{vi:.17g}\n")

    @classmethod
    def from_csv(cls, path) -> "GridFunction":
        data = np.loadtxt(path, delimiter=",", skiprows=1)
        if data.ndim != 2 or data.shape[1] != 2:
            raise GridError(f"{path}: expected two columns x,value")
        x, v = data[:, 0], data[:, 1]
        n = len(x)
        h = x[1] - x[0]
        if not np.allclose(np.diff(x), h, rtol=1e-12, atol=1e-12):
            raise GridError(f"{path}: nodes are not equispaced")
        spec = GridSpec(-x[0], n)
        if abs(spec.h - h) > 1e-12 * abs(h):
            raise GridError(f"{path}: node layout is not -L + j*h")
        return cls(spec, v)


@dataclass(frozen=True)
class MomentVector:
    """Moments M_k = int x^k f dx for k = 0..K."""

    m: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "m", np.asarray(self.m, dtype=np.float64))

    def __getitem__(self, k: int) -> float:
        return float(self.m[k])


@dataclass(frozen=True)
class Trajectory:
    """Sampled solution history: times[i] paired with states[i] = (u, du/dt)."""

    times: np.ndarray
    states: tuple

    def __post_init__(self):
        t = np.asarray(self.times, dtype=np.float64)
        if t.ndim != 1 or len(t) != len(self.states):
            raise GridError("times and states length mismatch")
        if len(t) == 0:
            raise GridError("empty trajectory")
        if t[0] != 0.0:
            raise GridError("trajectory must start at t = 0")
        if np.any(np.diff(t) <= 0.0):
            raise GridError("times must be strictly increasing")
        spec = self.states[0][0].spec
        for u, v in self.states:
            if u.spec != spec or v.spec != spec:
                raise GridError("all states must share one grid")
        t = t.copy()
        t.setflags(write=False)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "states", tuple(tuple(s) for s in self.states))

    @property
    def spec(self) -> GridSpec:
        return self.states[0][0].spec


def lp_norm(f: GridFunction, p: float) -> float:
    """L^p norm by trapezoidal quadrature (= h * sum on a periodic grid); p = inf is max |f|."""
    if p == math.inf:
        return float(np.max(np.abs(f.values)))
    p = float(p)
    if p < 1.0:
        raise ValueError(f"p must be >= 1 or inf, got {p}")
    h = f.spec.h
    if p == 1.0:
        return float(h * np.sum(np.abs(f.values)))
    if p == 2.0:
        return float(math.sqrt(h * np.sum(f.values * f.values)))
    return float((h * np.sum(np.abs(f.values) ** p)) ** (1.0 / p))


def spectral_derivative(f: GridFunction, order: int = 1) -> GridFunction:
    """d^order f / dx^order via the FFT, Nyquist mode zeroed for odd orders."""
    if order < 1:
        raise ValueError("order must be >= 1")
    xi = f.spec.freqs
    fh = np.fft.rfft(f.values)
    mult = (1j * xi) ** order
    if order % 2 == 1:
        mult = mult.copy()
        mult[-1] = 0.0
    out = np.fft.irfft(fh * mult, n=f.spec.points)
    return GridFunction(f.spec, out)


def sobolev_norm(f: GridFunction, p: float) -> float:
    """W^{1,p} norm: ||f||_p + ||f'||_p with the spectral derivative."""
    return lp_norm(f, p) + lp_norm(spectral_derivative(f), p)


def moment(f: GridFunction, k: int) -> float:
    """M_k(f) = int x^k f dx, trapezoidal; k <= 4 only (x^k amplifies truncation)."""
    if not (0 <= int(k) <= 4):
        raise MomentOrderError(f"moment order must be 0..4, got {k}")
    x = f.spec.nodes
    return float(f.spec.h * np.sum((x ** int(k)) * f.values))


def moments(f: GridFunction, k_max: int = 4) -> MomentVector:
    return MomentVector(np.array([moment(f, k) for k in range(k_max + 1)]))


_WEIGHTED_KINDS = ("X", "Y", "Z")


def weighted_norm(traj: Trajectory, kind: str, p: float) -> float:
    """Weighted space-time norm of a trajectory.

    With p' = p/(p-1) and a = 1/(2p'), the three flavours are

      X: sup_t [||u||_1 + (1+t)^a ||u||_p]
         + sup_t (1+t)^{1/2} [||u_x||_1 + (1+t)^a ||u_x||_p]
         + sup_t (1+t)      [||u_t||_1 + (1+t)^a ||u_t||_p]

      Y: sup_t (1+t)^{1/2} [||u||_{W^{1,1}} + (1+t)^a ||u||_{W^{1,p}}]
         + sup_t (1+t)     [||u_t||_1 + (1+t)^a ||u_t||_p]

      Z: same as Y with both prefactors raised to (1+t).
    """
    if kind not in _WEIGHTED_KINDS:
        raise ValueError(f"kind must be one of {_WEIGHTED_KINDS}, got {kind!r}")
    p = float(p)
    if not (1.0 < p <= 3.0):
        raise ValueError(f"p must lie in (1, 3], got {p}")
    a = (p - 1.0) / (2.0 * p)  # 1/(2 p')

    s1 = s2 = s3 = 0.0
    for t, (u, v) in zip(traj.times, traj.states):
        w = 1.0 + t
        ux = spectral_derivative(u)
        u1, up = lp_norm(u, 1), lp_norm(u, p)
        d1, dp = lp_norm(ux, 1), lp_norm(ux, p)
        v1, vp = lp_norm(v, 1), lp_norm(v, p)
        wa = w ** a
        if kind == "X":
            s1 = max(s1, u1 + wa * up)
            s2 = max(s2, math.sqrt(w) * (d1 + wa * dp))
            s3 = max(s3, w * (v1 + wa * vp))
        elif kind == "Y":
            s1 = max(s1, math.sqrt(w) * ((u1 + d1) + wa * (up + dp)))
            s2 = max(s2, w * (v1 + wa * vp))
        else:
            s1 = max(s1, w * ((u1 + d1) + wa * (up + dp)))
            s2 = max(s2, w * (v1 + wa * vp))
    return s1 + s2 + s3
