import numpy as np
import pytest

from dwlab.odi import (OdiConfig, OdiTrace, PlateauViolation, odi_scaling_fit,
                       odi_target_slope, simulate_odi, w_inequality_fit,
                       w_inequality_total_time)


def blow_time(cfg):
    tr = simulate_odi(cfg)
    assert tr.blown_up, f"no blow-up by horizon {cfg.horizon}"
    return tr.blowup_time


# ----------------------------------------------------------------------
# config and trace contracts
# ----------------------------------------------------------------------


def test_config_validation():
    good = dict(p=2.0, beta=0.0)
    OdiConfig(**good)
    for bad in (dict(p=1.0, beta=0.0), dict(p=2.0, beta=1.0),
                dict(p=2.0, beta=-0.1),
                dict(p=2.0, beta=0.0, t0=3.9),
                dict(p=2.0, beta=0.0, eps=-1e-3),
                dict(p=2.0, beta=0.0, c1=0.0),
                dict(p=2.0, beta=0.0, dt=0.0),
                dict(p=2.0, beta=0.0, horizon=4.0),
                dict(p=2.0, beta=0.0, m1_abs=0.0)):
        with pytest.raises(ValueError):
            OdiConfig(**bad)


def test_seed_combines_eps_and_moment():
    cfg = OdiConfig(p=2.0, beta=0.0, eps=2e-3, m1_abs=3.0)
    assert cfg.seed == pytest.approx(6e-3)


def test_zero_seed_is_fixed_point():
    tr = simulate_odi(OdiConfig(p=2.0, beta=0.0, eps=0.0))
    assert not tr.blown_up
    assert np.all(tr.v == 0.0)


def test_dt_snaps_to_unit_fraction():
    # dt = 0.3 rounds to 1/3 so the memory window is a whole step count
    tr = simulate_odi(OdiConfig(p=2.0, beta=0.0, eps=0.05, dt=0.3,
                                horizon=60.0))
    gaps = np.diff(tr.times[:5])
    assert np.allclose(gaps, 1.0 / 3.0)


def test_trace_rejects_doctored_arrays():
    t = 4.0 + np.arange(64) / 8.0
    v = np.full(64, 2.0)
    OdiTrace(t, v)
    bad = v.copy()
    bad[40] = 1.0  # dip after the window fills
    with pytest.raises(ValueError):
        OdiTrace(t, bad)
    with pytest.raises(ValueError):
        OdiTrace(t, -v)
    with pytest.raises(ValueError):
        OdiTrace(t, v[:-1])


def test_trace_csv(tmp_path):
    tr = simulate_odi(OdiConfig(p=2.0, beta=0.0, eps=0.05, horizon=30.0))
    path = tmp_path / "odi.csv"
    tr.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "t,v"
    assert len(lines) == len(tr.times) + 1


# ----------------------------------------------------------------------
# march behavior
# ----------------------------------------------------------------------


def test_blowup_time_monotone_in_eps():
    base = OdiConfig(p=2.0, beta=0.0, dt=1.0 / 32.0)
    times = [blow_time(OdiConfig(p=2.0, beta=0.0, dt=base.dt, eps=e))
             for e in (1e-3, 3e-3, 1e-2)]
    assert times[0] > times[1] > times[2]


def test_blowup_time_monotone_in_couplings():
    t_ref = blow_time(OdiConfig(p=2.0, beta=0.0, eps=3e-3))
    t_big = blow_time(OdiConfig(p=2.0, beta=0.0, eps=3e-3, c1=4.0, c2=4.0))
    assert t_big <= t_ref


def test_refinement_shifts_blowup_under_5pct():
    coarse = simulate_odi(OdiConfig(p=2.0, beta=0.0, eps=3e-3, dt=1.0 / 8.0))
    horizon = coarse.blowup_time * 1.25
    t_c = blow_time(OdiConfig(p=2.0, beta=0.0, eps=3e-3, dt=1.0 / 8.0,
                              horizon=horizon))
    t_f = blow_time(OdiConfig(p=2.0, beta=0.0, eps=3e-3, dt=1.0 / 64.0,
                              horizon=horizon))
    assert abs(t_c - t_f) / t_f < 0.05


def test_scaling_fit_recovers_target_slope():
    cfg = OdiConfig(p=2.0, beta=0.0, dt=1.0 / 32.0)
    fit = odi_scaling_fit(cfg, np.geomspace(1e-3, 1e-2, 5))
    target = odi_target_slope(2.0, 0.0)
    assert target == -1.0
    assert abs(fit.slope - target) <= 0.1 * abs(target)
    assert fit.r_squared >= 0.98


def test_scaling_fit_input_checks():
    cfg = OdiConfig(p=2.0, beta=0.0)
    with pytest.raises(ValueError):
        odi_scaling_fit(cfg, [1e-3, 1e-2])
    with pytest.raises(ValueError):
        odi_scaling_fit(cfg, [1e-3, -1e-3, 1e-2])
    censored = OdiConfig(p=2.0, beta=0.0, eps=1e-6, horizon=10.0)
    with pytest.raises(RuntimeError):
        odi_scaling_fit(censored, [1e-6, 2e-6, 4e-6])


def test_target_slope_table():
    assert odi_target_slope(2.0, 0.5) == pytest.approx(-2.0)
    assert odi_target_slope(1.5, 0.25) == pytest.approx(-2.0 / 3.0)
    with pytest.raises(ValueError):
        odi_target_slope(2.0, 1.0)


# ----------------------------------------------------------------------
# two-phase corridor chain
# ----------------------------------------------------------------------


def test_w_chain_argument_checks():
    for p in (1.0, 1.6, 2.0):
        with pytest.raises(ValueError):
            w_inequality_total_time(p, 1e-4)
    with pytest.raises(ValueError):
        w_inequality_total_time(1.25, 0.0)


def test_w_chain_plateau_violation_at_large_eps():
    with pytest.raises(PlateauViolation):
        w_inequality_total_time(1.5, 1.0)


def test_w_chain_totals_monotone():
    t_small = w_inequality_total_time(1.25, 1e-6, dt=1.0 / 16.0)
    t_large = w_inequality_total_time(1.25, 1e-5, dt=1.0 / 16.0)
    assert t_small > t_large > 5.0


def test_w_chain_fit_slope_subcritical():
    eps = np.geomspace(1e-8, 1e-6, 4)
    fit = w_inequality_fit(1.25, eps, dt=1.0 / 16.0)
    target = -(1.25 - 1.0) / (2.0 - 1.25)
    assert abs(fit.slope - target) <= 0.15 * abs(target)
    assert fit.r_squared >= 0.99
