"""Numerical laboratory for the 1D semilinear damped wave equation u_tt + u_t - u_xx = |u|^p."""

from .grid import (
    GridSpec,
    GridFunction,
    MomentVector,
    Trajectory,
    make_grid,
    grid_for_horizon,
    lp_norm,
    sobolev_norm,
    spectral_derivative,
    moment,
    moments,
    weighted_norm,
)
from .special import (
    bessel_i0,
    lambert_w0,
    gaussian_derivative,
    make_data_family,
    DataFamily,
    LifespanPrediction,
    predict_lifespan,
    predicted_exponent,
    tilde_T2p,
    tilde_T2p_closed_form,
)
from .fitting import ExponentFit, fit_loglog, fit_critical_lifespan
from .propagators import (
    PropagatorSymbol,
    damped_symbol,
    apply_S,
    apply_dtS,
    apply_S_kernel,
    apply_heat,
    apply_wave,
    DecayReport,
    decay_scan,
    residual_scan,
)
from .solver import (
    SolverState,
    SolverControls,
    LifespanEstimate,
    FunctionalTrace,
    BlowupSignal,
    SamplingError,
    step,
    integrate,
    track_functionals,
    solve_lifespan,
    duhamel_residual,
)
from .odi import (
    OdiConfig,
    OdiTrace,
    PlateauViolation,
    simulate_odi,
    odi_scaling_fit,
    odi_target_slope,
    w_inequality_total_time,
    w_inequality_fit,
)

__version__ = "0.1.0"
