"""Time integration for the damped wave equation with power forcing.

The first-order system for y = (u, v), v = du/dt,

    du/dt = v,   dv/dt = -v + u_xx + |u|^p,

is advanced by an integrating-factor RK4: the linear flow is applied
exactly through the damped symbol pair (see propagators), classical RK4
handles the transformed nonlinearity.  With E = M(dt), Eh = M(dt/2) the
step reads

    k1 = N(y),  k2 = N(Eh (y + dt/2 k1)),  k3 = N(Eh y + dt/2 k2),
    k4 = N(E y + dt Eh k3),
    y' = E y + dt/6 (E k1 + 2 Eh (k2 + k3) + k4),

where N(y) = (0, |u|^p).  The linear symbol is bounded on every Fourier
mode, so the scheme is not stiffness-limited, and exactness on the
linear part makes linear-regime checks sharp.  |u|^p is evaluated
pointwise on a 2x-refined grid and spectrally restricted; exact
dealiasing is impossible for non-polynomial powers, so the residual
aliasing is controlled a posteriori by duhamel_residual.

Blow-up runs march adaptively: dt is halved whenever the step-doubling
error estimate exceeds tol or the sup norm doubles within a step, and a
run is declared blown up once the sup norm passes the threshold and the
extrapolated divergence time is bracketed to under one percent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.interpolate import CubicSpline

from .grid import GridError, GridFunction, GridSpec, Trajectory
from .propagators import apply_S, apply_dtS, damped_symbol, linear_pair_matrix
from .special import DataFamily

__all__ = [
    "BLOWN_UP",
    "SURVIVED_HORIZON",
    "TRUNCATION_ABORT",
    "STATUSES",
    "BlowupSignal",
    "SamplingError",
    "SolverState",
    "SolverControls",
    "LifespanEstimate",
    "FunctionalTrace",
    "step",
    "integrate",
    "solve_lifespan",
    "duhamel_residual",
    "track_functionals",
]

BLOWN_UP = "blown_up"
SURVIVED_HORIZON = "survived_horizon"
TRUNCATION_ABORT = "truncation_abort"
STATUSES = (BLOWN_UP, SURVIVED_HORIZON, TRUNCATION_ABORT)


class BlowupSignal(RuntimeError):
    """Raised when a step produces a non-finite field.

    Not a failure: it marks proximity to the blow-up time.  The time of
    the last finite state is carried in .t.
    """

    def __init__(self, t: float):
        super().__init__(f"non-finite field after t = {t:.6g}")
        self.t = t


class SamplingError(ValueError):
    """Trajectory too sparse for the requested quadrature."""


@dataclass(frozen=True)
class SolverState:
    """One snapshot of the first-order system."""

    t: float
    u: GridFunction
    v: GridFunction
    dt: float
    steps_taken: int = 0
    max_abs_u: float = None  # type: ignore[assignment]

    def __post_init__(self):
        if self.u.spec != self.v.spec:
            raise GridError("u and v live on different grids")
        if not self.dt > 0.0:
            raise ValueError("dt must be positive")
        if self.max_abs_u is None:
            object.__setattr__(self, "max_abs_u",
                               float(np.max(np.abs(self.u.values))))

    @property
    def spec(self) -> GridSpec:
        return self.u.spec

    @classmethod
    def from_data(cls, u0: GridFunction, v0: GridFunction,
                  dt: float) -> "SolverState":
        return cls(0.0, u0, v0, dt)


@dataclass(frozen=True)
class SolverControls:
    """Tolerances and limits for the adaptive lifespan march."""

    dt_init: float = 0.02
    dt_min: float = 1e-12
    dt_max: float = 0.25
    step_tol: float = 1e-8
    threshold: float = None  # type: ignore[assignment]  # None -> max(1e6*eps, 1e4)
    check_boundary: bool = True
    boundary_tol: float = 1e-8
    max_steps: int = 2_000_000

    def __post_init__(self):
        if not (0.0 < self.dt_min <= self.dt_init <= self.dt_max):
            raise ValueError("need 0 < dt_min <= dt_init <= dt_max")
        if not self.step_tol > 0.0:
            raise ValueError("step_tol must be positive")


@dataclass(frozen=True)
class LifespanEstimate:
    """Bracket for the blow-up time, or the reason none was found."""

    status: str
    T_low: float
    T_high: float
    threshold_used: float
    grid: GridSpec

    def __post_init__(self):
        if self.status not in STATUSES:
            raise ValueError(f"unknown status {self.status!r}")
        if not self.T_low <= self.T_high:
            raise ValueError("bracket must satisfy T_low <= T_high")
        if self.status == BLOWN_UP:
            if self.T_high - self.T_low > 0.01 * self.T_high:
                raise ValueError("blown_up bracket wider than 1% of T_high")


@dataclass(frozen=True)
class FunctionalTrace:
    """Corridor functionals along a run: U(t), w_plus(t), w_minus(t).

    w_plus / w_minus are nan before t = 4, where the corridors are not
    defined.
    """

    times: np.ndarray
    U: np.ndarray
    w_plus: np.ndarray
    w_minus: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=np.float64)
        cols = []
        for name in ("U", "w_plus", "w_minus"):
            c = np.asarray(getattr(self, name), dtype=np.float64)
            if c.shape != t.shape:
                raise ValueError(f"{name} not aligned with times")
            cols.append(c)
        for arr, name in zip((t, *cols), ("times", "U", "w_plus", "w_minus")):
            a = arr.copy()
            a.setflags(write=False)
            object.__setattr__(self, name, a)

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("t,U,w_plus,w_minus\n")
            for t, a, b, c in zip(self.times, self.U, self.w_plus, self.w_minus):
                fh.write(f"{t:.17g},{a:.17g},{b:.17g},{c:.17g}\n")


# ----------------------------------------------------------------------
# the stepper core
# ----------------------------------------------------------------------


@lru_cache(maxsize=256)
def _pair_ops(spec: GridSpec, t: float):
    return linear_pair_matrix(t, spec)


def _stage_ops(spec: GridSpec, dt: float):
    return _pair_ops(spec, dt), _pair_ops(spec, 0.5 * dt)


def _nl_hat(yu: np.ndarray, p: float) -> np.ndarray:
    """rfft of |u|^p, u given by its rfft, antialiased via a 2x grid."""
    m = len(yu) - 1
    n = 2 * m
    fh = np.zeros(n + 1, dtype=np.complex128)
    fh[: m + 1] = yu
    fh[m] *= 0.5
    fine = np.fft.irfft(fh, 2 * n) * 2.0
    w = np.abs(fine) ** p
    wh = np.fft.rfft(w)
    out = wh[: m + 1] * 0.5
    out[m] = wh[m].real  # fold the fine mode at the coarse Nyquist index
    return out


def _lawson_step(yu, yv, p, E, Eh, dt, nonlinear, w1=None):
    a11, a12, a21, a22 = E
    eu = a11 * yu + a12 * yv
    ev = a21 * yu + a22 * yv
    if not nonlinear:
        return eu, ev
    b11, b12, b21, b22 = Eh
    # overflow to inf/nan is the blow-up detector downstream, not an error
    with np.errstate(over="ignore", invalid="ignore"):
        if w1 is None:
            w1 = _nl_hat(yu, p)
        w2 = _nl_hat(b11 * yu + b12 * (yv + (0.5 * dt) * w1), p)
        w3 = _nl_hat(b11 * yu + b12 * yv, p)
        w4 = _nl_hat(eu + (dt * b12) * w3, p)
        c = dt / 6.0
        return (eu + c * (a12 * w1 + 2.0 * b12 * (w2 + w3)),
                ev + c * (a22 * w1 + 2.0 * b22 * (w2 + w3) + w4))


def _attempt(yu, yv, p, spec, dt, nonlinear):
    """One dt step and two dt/2 steps; returns the fine pair and the gap."""
    E, Eh = _stage_ops(spec, dt)
    w1 = _nl_hat(yu, p) if nonlinear else None
    fu, fv = _lawson_step(yu, yv, p, E, Eh, dt, nonlinear, w1)
    E2, E2h = _stage_ops(spec, 0.5 * dt)
    gu, gv = _lawson_step(yu, yv, p, E2, E2h, 0.5 * dt, nonlinear, w1)
    gu, gv = _lawson_step(gu, gv, p, E2, E2h, 0.5 * dt, nonlinear)
    scale = max(float(np.max(np.abs(gu))), float(np.max(np.abs(gv))), 1e-300)
    du = (gu - fu) / scale
    dv = (gv - fv) / scale
    num = math.sqrt(float(np.mean(np.abs(du) ** 2) + np.mean(np.abs(dv) ** 2)))
    den = math.sqrt(float(np.mean(np.abs(gu / scale) ** 2)
                          + np.mean(np.abs(gv / scale) ** 2))) + 1e-300
    return gu, gv, num / den


def step(state: SolverState, p: float, dt: float,
         nonlinear: bool = True) -> SolverState:
    """Advance one step of size dt.  Raises BlowupSignal on overflow."""
    if not dt > 0.0:
        raise ValueError("dt must be positive")
    spec = state.spec
    yu = np.fft.rfft(state.u.values)
    yv = np.fft.rfft(state.v.values)
    E, Eh = _stage_ops(spec, float(dt))
    zu, zv = _lawson_step(yu, yv, float(p), E, Eh, float(dt), nonlinear)
    u = np.fft.irfft(zu, spec.points)
    v = np.fft.irfft(zv, spec.points)
    if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v))):
        raise BlowupSignal(state.t)
    return SolverState(state.t + dt, GridFunction(spec, u),
                       GridFunction(spec, v), dt, state.steps_taken + 1)


def integrate(u0: GridFunction, v0: GridFunction, p: float, t_final: float,
              dt: float, nonlinear: bool = True,
              store_every: int = 1) -> Trajectory:
    """Fixed-step march to t_final, sampling every store_every-th step.

    dt is nudged so that t_final is an integer number of steps; the
    initial state and the final state are always stored.
    """
    if u0.spec != v0.spec:
        raise GridError("u0 and v0 live on different grids")
    if not t_final > 0.0 or not dt > 0.0:
        raise ValueError("t_final and dt must be positive")
    n = max(1, int(round(t_final / dt)))
    dt = t_final / n
    spec = u0.spec
    yu = np.fft.rfft(u0.values)
    yv = np.fft.rfft(v0.values)
    E, Eh = _stage_ops(spec, dt)
    times = [0.0]
    states = [(u0, v0)]
    for k in range(1, n + 1):
        yu, yv = _lawson_step(yu, yv, float(p), E, Eh, dt, nonlinear)
        if k % store_every == 0 or k == n:
            u = np.fft.irfft(yu, spec.points)
            v = np.fft.irfft(yv, spec.points)
            if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v))):
                raise BlowupSignal((k - 1) * dt)
            times.append(k * dt)
            states.append((GridFunction(spec, u), GridFunction(spec, v)))
    return Trajectory(np.array(times), tuple(states))


# ----------------------------------------------------------------------
# corridor functionals
# ----------------------------------------------------------------------

_CORRIDOR_MIN_POINTS = 8
_CORRIDOR_T0 = 4.0


def _sample_offgrid(f: GridFunction, xq: np.ndarray) -> np.ndarray:
    """Cubic Lagrange evaluation between nodes, periodic indexing."""
    spec = f.spec
    s = (np.asarray(xq, dtype=np.float64) + spec.half_width) / spec.h
    base = np.floor(s).astype(np.int64)
    r = s - base
    idx = (base[:, None] + np.arange(-1, 3)[None, :]) % spec.points
    w = np.stack([-r * (r - 1.0) * (r - 2.0) / 6.0,
                  (r + 1.0) * (r - 1.0) * (r - 2.0) / 2.0,
                  -(r + 1.0) * r * (r - 2.0) / 2.0,
                  (r + 1.0) * r * (r - 1.0) / 6.0], axis=1)
    return (f.values[idx] * w).sum(axis=1)


def _region_inf(f: GridFunction, lo: float, hi: float, strict: bool) -> float:
    """Infimum of f over an interval; interpolates when nodes are scarce."""
    x = f.spec.nodes
    if strict:
        mask = (x > lo) & (x < hi)
    else:
        mask = (x >= lo - 1e-12) & (x <= hi + 1e-12)
    vals = f.values[mask]
    if vals.size < _CORRIDOR_MIN_POINTS:
        xq = np.linspace(lo, hi, _CORRIDOR_MIN_POINTS + 2)[1:-1]
        vals = np.concatenate([vals, _sample_offgrid(f, xq)])
    return float(vals.min())


def _functional_values(u: GridFunction, t: float):
    rt = math.sqrt(t)
    uval = rt * _region_inf(u, -rt, rt, strict=False)
    if t >= _CORRIDOR_T0:
        wp = t * _region_inf(u, 0.5 * rt, rt, strict=True)
        wm = t * _region_inf(u, -rt, -0.5 * rt, strict=True)
    else:
        wp = math.nan
        wm = math.nan
    return uval, wp, wm


def track_functionals(state: SolverState):
    """(U, w_plus, w_minus) at state.t; the corridors need t >= 4."""
    if state.t < _CORRIDOR_T0:
        raise ValueError("corridor functionals are defined for t >= 4")
    return _functional_values(state.u, state.t)


# ----------------------------------------------------------------------
# lifespan march
# ----------------------------------------------------------------------


def _extrapolate_blowup(ts, ms, p: float):
    """Root of the linear fit of sup-norm^(-(p-1)/2) over the last samples.

    That power vanishes linearly in time for the generic u'' = u^p rate
    u ~ C (T-t)^{-2/(p-1)}, so its t-intercept estimates T.  Returns None
    while the fit does not yet predict divergence at a finite time.
    """
    k = min(20, len(ts))
    if k < 3:
        return None
    t = np.asarray(ts[-k:])
    z = np.asarray(ms[-k:]) ** (-(p - 1.0) / 2.0)
    if not np.all(np.isfinite(z)):
        return None
    a, b = np.polyfit(t, z, 1)
    if not a < 0.0:
        return None
    return max(float(-b / a), float(t[-1]))


def _edge_amplitude(values: np.ndarray) -> float:
    return float(np.max(np.abs(values[[0, 1, -2, -1]])))


def solve_lifespan(data: DataFamily, p: float, eps=None, horizon: float = 200.0,
                   ctrl: SolverControls = None):
    """Adaptive march until blow-up, the horizon, or a truncation abort.

    Returns (LifespanEstimate, FunctionalTrace).  The data family fixes
    the grid; the solved fields start from eps * (f0, f1) with eps
    defaulting to data.epsilon.  Set ctrl.check_boundary = False for
    torus-type data that is not compactly supported.
    """
    if ctrl is None:
        ctrl = SolverControls()
    u0, u1 = data.initial_data(eps)
    spec = data.f0.spec
    amp = data.epsilon if eps is None else float(eps)
    threshold = ctrl.threshold if ctrl.threshold is not None \
        else max(1e6 * amp, 1e4)
    if not horizon > 0.0:
        raise ValueError("horizon must be positive")

    u_phys = u0.values
    v_phys = u1.values
    maxu = float(np.max(np.abs(u_phys)))
    if maxu == 0.0 and not np.any(v_phys):
        est = LifespanEstimate(SURVIVED_HORIZON, horizon, horizon,
                               threshold, spec)
        w0 = 0.0 if horizon >= _CORRIDOR_T0 else math.nan
        trace = FunctionalTrace(np.array([horizon]), np.array([0.0]),
                                np.array([w0]), np.array([w0]))
        return est, trace

    p = float(p)
    u_cap = 1e250 ** (1.0 / p)
    yu = np.fft.rfft(u_phys)
    yv = np.fft.rfft(v_phys)
    t = 0.0
    dt = float(np.clip(ctrl.dt_init, ctrl.dt_min, ctrl.dt_max))
    steps = 0
    since_reject = 0
    ts, us, wps, wms = [], [], [], []
    samp_t, samp_m = [], []
    status = None
    T_low = T_high = None

    while True:
        if steps >= ctrl.max_steps:
            raise RuntimeError("step budget exceeded before a verdict")
        remaining = horizon - t
        if remaining <= ctrl.dt_min:
            status = SURVIVED_HORIZON
            T_low = T_high = horizon
            break
        dt_eff = min(dt, remaining)
        gu, gv, err = _attempt(yu, yv, p, spec, dt_eff, True)
        steps += 1
        cand = np.fft.irfft(gu, spec.points)
        cand_max = float(np.max(np.abs(cand)))
        bad = (not math.isfinite(err)) or (not math.isfinite(cand_max)) \
            or err > ctrl.step_tol or cand_max > 2.0 * max(maxu, 1e-300)
        if bad and dt > ctrl.dt_min * 1.0000001:
            dt = max(0.5 * dt, ctrl.dt_min)
            since_reject = 0
            continue
        if not math.isfinite(cand_max):
            # dt is already at the floor; the field left the finite range
            status = BLOWN_UP
            T_low = t
            break
        # accept (at dt_min even an out-of-tolerance step is taken)
        t += dt_eff
        yu, yv = gu, gv
        maxu = cand_max
        samp_t.append(t)
        samp_m.append(maxu)
        uval, wp, wm = _functional_values(GridFunction(spec, cand), t)
        ts.append(t)
        us.append(uval)
        wps.append(wp)
        wms.append(wm)
        if ctrl.check_boundary and \
                _edge_amplitude(cand) > ctrl.boundary_tol * max(maxu, 1e-300):
            status = TRUNCATION_ABORT
            T_low = T_high = t
            break
        if maxu >= u_cap:
            status = BLOWN_UP
            T_low = t
            break
        if maxu >= threshold:
            root = _extrapolate_blowup(samp_t, samp_m, p)
            if root is not None and root - t <= 0.005 * root:
                status = BLOWN_UP
                T_low = t
                T_high = root
                break
        since_reject += 1
        if since_reject >= 8 and err < ctrl.step_tol / 64.0 and dt < ctrl.dt_max:
            dt = min(2.0 * dt, ctrl.dt_max)
            since_reject = 0

    if status == BLOWN_UP and T_high is None:
        root = _extrapolate_blowup(samp_t, samp_m, p)
        T_high = T_low if root is None else min(root, T_low * 1.005)
        T_high = max(T_high, T_low)
    est = LifespanEstimate(status, T_low, T_high, threshold, spec)
    trace = FunctionalTrace(np.array(ts), np.array(us), np.array(wps),
                            np.array(wms))
    return est, trace


# ----------------------------------------------------------------------
# Duhamel consistency oracle
# ----------------------------------------------------------------------


def duhamel_residual(traj: Trajectory, p: float, nodes: int = 64,
                     include_nonlinear: bool = True,
                     checkpoints=None) -> float:
    """Worst relative L2 gap between u(t) and its integral-equation form.

    The right-hand side S(t)(u0+u1) + dtS(t)u0 + int_0^t S(t-tau)|u|^p
    is rebuilt with Gauss-Legendre quadrature in tau (u(tau) by cubic
    spline in time), entirely through the linear propagators, so this is
    independent of the stepper.  Checkpoints must be sample times; by
    default the quarter points of the trajectory.
    """
    if nodes < 64:
        raise SamplingError("at least 64 quadrature nodes are required")
    times = traj.times
    if len(times) < 16:
        raise SamplingError("trajectory too sparse for the tau quadrature")
    spec = traj.spec
    u0, v0 = traj.states[0]
    if checkpoints is None:
        idx = sorted({int(round(f * (len(times) - 1)))
                      for f in (0.25, 0.5, 0.75, 1.0)} - {0})
    else:
        idx = []
        for tc in checkpoints:
            i = int(np.argmin(np.abs(times - tc)))
            if abs(times[i] - tc) > 1e-9 * max(1.0, abs(tc)) or i == 0:
                raise ValueError("checkpoints must be positive sample times")
            idx.append(i)
    U = np.stack([s[0].values for s in traj.states])
    spline = CubicSpline(times, U, axis=0) if include_nonlinear else None
    xg, wg = np.polynomial.legendre.leggauss(int(nodes))
    lin0 = u0 + v0
    worst = 0.0
    for i in idx:
        tc = float(times[i])
        target = U[i]
        rhs = apply_S(tc, lin0, check_boundary=False).values \
            + apply_dtS(tc, u0, check_boundary=False).values
        if include_nonlinear:
            tau = 0.5 * tc * (xg + 1.0)
            wq = 0.5 * tc * wg
            nl = np.abs(spline(tau)) ** p
            nlh = np.fft.rfft(nl, axis=1)
            acc = np.zeros(spec.points // 2 + 1, dtype=np.complex128)
            for q in range(len(tau)):
                sig = damped_symbol(tc - tau[q], spec).sigma
                acc += wq[q] * sig * nlh[q]
            rhs = rhs + np.fft.irfft(acc, spec.points)
        gap = np.linalg.norm(target - rhs)
        ref = np.linalg.norm(target)
        if ref == 0.0:
            continue
        worst = max(worst, float(gap / ref))
    return worst
