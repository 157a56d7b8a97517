import numpy as np
import pytest
from dataclasses import replace

from helpers import random_household
from privagg.centralized import CentralizedProblem, objective, solve_centralized
from privagg.core import BatteryParams, HouseholdConfig, QuantizationGrid, quantize
from privagg.hems import (ControllerCoefficients, Fleet, HemsState, descent_step, hems_tick, initial_state,
                          local_gradients, local_objective)
from privagg.kernels.fleet import NUMPY
from privagg.privacy import HistogramWindow, mi_proxy_gradient, window_coefficients

DT = 1 / 3600


def test_gradient_examples():
    c = ControllerCoefficients(sigma1=5.0, sigma2=0.0, r=0.012)
    gp, gm, gz = local_gradients(1.0, 1.5, 1.0, 0.2, np.zeros(3), c, np.zeros(3), 0.0)
    assert gp == pytest.approx(2.0) and gm == pytest.approx(-2.0) and np.all(gz == 0)
    gp, gm, gz = local_gradients(1.0, 1.0, 1.0, 0.0, np.full(3, 0.3), c, np.zeros(3), 0.0)
    assert gp == 0 and gm == 0 and np.all(gz == 0)


def test_descent_examples():
    assert descent_step(1.0, 2.0, 0.012) == pytest.approx(0.976)
    assert descent_step(1.0, 0.0, 0.012) == 1.0
    assert descent_step(0.0, -1.0, 0.012) == pytest.approx(0.012)
    assert np.allclose(descent_step(np.ones(2), np.array([1.0, -1.0]), 0.5), [0.5, 1.5])


def filled_window(rng, m, n, capacity=120):
    w = HistogramWindow(m, n, capacity)
    for _ in range(capacity - 1):
        w.update(int(rng.integers(m)), rng.dirichlet(np.ones(n)))
    return w


def test_gradients_match_finite_differences():
    rng = np.random.default_rng(1)
    worst = 0.0
    for _ in range(100):
        m, n = int(rng.integers(2, 10)), int(rng.integers(2, 10))
        w = filled_window(rng, m, n, int(rng.integers(5, 200)))
        mi = window_coefficients(w, int(rng.integers(m)))
        c = ControllerCoefficients(float(rng.uniform(0, 10)), float(rng.uniform(0, 1e-2)), 0.012)
        mu = float(rng.uniform(0, 9))
        xhat, y_ref, e = rng.uniform(0, 3), rng.uniform(0, 3), rng.normal()
        sp, sm = (rng.uniform(0, 3), 0.0) if rng.uniform() < 0.5 else (0.0, rng.uniform(0, 3))
        z = rng.uniform(0, 1, n)
        y_lin = xhat + sp - sm
        gp, gm, gz = local_gradients(xhat, y_lin, y_ref, e, z, c, mi_proxy_gradient(mi, z), mu, sp, sm)
        f = lambda a, b, zz: local_objective(a, b, zz, xhat, y_ref, e, c, mi, mu, y_lin)  # noqa: E731
        h = 1e-5
        fd = [(f(sp + h, sm, z) - f(sp - h, sm, z)) / (2 * h), (f(sp, sm + h, z) - f(sp, sm - h, z)) / (2 * h)]
        fd += [(f(sp, sm, z + h * u) - f(sp, sm, z - h * u)) / (2 * h) for u in np.eye(n)]
        an = np.concatenate(([gp, gm], gz))
        fd = np.array(fd)
        worst = max(worst, np.max(np.abs(fd - an) / np.maximum(np.abs(an), 1e-3)))
    assert worst <= 1e-5, worst


def one_bin_household(mu=0.0):
    grid = QuantizationGrid([0.0, 1.0, 2.0], [0.0, 1.0, 2.0, 3.0, 4.0])
    return HouseholdConfig(BatteryParams(), grid, [1.0], mu, 0.0, 4.0)


def test_tick_keeps_feasible_descent():
    hh = one_bin_household()
    c = ControllerCoefficients(5.0, 0.0, 0.012)
    z = np.zeros((2, 4))
    z[:, 1] = 1.0
    st = HemsState(3.2, z, True, 0.5, 0.0)
    # y_prev == y_ref and the mismatch pushes s down by 0.1
    e = 0.1 / 0.012 / 5.0
    dec, new, _ = hems_tick(st, HistogramWindow(2, 4, 10), 0.6, 1.1, e, c, hh, DT)
    assert dec.s_plus == pytest.approx(0.4, abs=1e-12) and dec.s_minus == 0
    assert new.charge_flag and dec.flag_after
    assert new.soc == pytest.approx(3.2 + DT * 0.96 * 0.4)


def test_tick_negative_target_flips_through_zero():
    hh = one_bin_household()
    c = ControllerCoefficients(5.0, 0.0, 0.012)
    z = np.zeros((2, 4))
    z[:, 0] = 1.0
    st = HemsState(3.2, z, True, 0.05, 0.0)
    e = 0.15 / 0.012 / 5.0
    w = HistogramWindow(2, 4, 10)
    dec, new, w = hems_tick(st, w, 0.6, 0.65, e, c, hh, DT)
    assert dec.s_plus == 0.0 and dec.s_minus == 0.0
    assert not new.charge_flag
    assert len(w) == 1 and abs(dec.z_row.sum() - 1) < 1e-9
    # next tick may discharge
    dec2, new2, _ = hems_tick(new, w, 0.6, 0.65, e, c, hh, DT)
    assert dec2.s_plus == 0.0 and dec2.s_minus > 0


def test_fleet_matches_scalar_controller():
    rng = np.random.default_rng(4)
    hhs = [random_household(rng, n=6, m=5) for _ in range(4)]
    hhs = [replace(h, battery=hhs[0].battery) for h in hhs]
    c = ControllerCoefficients(5.0, 1e-4, 0.012)
    for kernels in (None, NUMPY):
        fleet = Fleet(hhs, c, 1.0, DT, capacity=30, kernels=kernels)
        states = [initial_state(h, 1.0) for h in hhs]
        windows = [HistogramWindow(5, 6, 30) for _ in hhs]
        y_prev = 0.0
        for t in range(300):
            x = rng.uniform(0, [h.grid.x_edges[-1] for h in hhs])
            yr = np.array([h.y_ref_at(t) for h in hhs])
            e = y_prev - 1.0
            dec = fleet.tick(x, yr, e)
            for l, h in enumerate(hhs):
                d, states[l], windows[l] = hems_tick(states[l], windows[l], x[l], yr[l], e, c, h, DT)
                assert d.s_plus == pytest.approx(dec.s_plus[l], abs=1e-9)
                assert d.s_minus == pytest.approx(dec.s_minus[l], abs=1e-9)
                assert np.allclose(d.z_row, dec.z[l], atol=1e-9)
                assert states[l].soc == pytest.approx(fleet.soc[l], abs=1e-12)
            y_prev = float(dec.y.sum())
            assert np.all(dec.s_plus * dec.s_minus == 0)


def static_instance(seed, capacity=6.4, soc=3.2):
    """One household with a realistic frozen window and constant inputs."""
    from privagg.sim.config import ScenarioConfig
    from privagg.sim.runner import build_scenario
    sc = build_scenario(ScenarioConfig(households=1, horizon=3600, discard=0, seed=seed, capacity=capacity,
                                       soc0=soc))
    fleet = Fleet(sc.households, sc.coeffs, soc, DT)
    for t in range(900):
        x = sc.x[:, t]
        ist = fleet.kernels.quantize_rows(x, fleet.a["x_edges"])
        z = np.zeros((1, 15))
        z[0, quantize(x[0], sc.households[0].grid.y_edges)] = 1.0
        fleet.windows.push(ist, z)
    return fleet, sc.x[:, 900], sc.y_ref[:, 900], float(sc.y_bar[900])


def static_gap(fleet, x, y_ref, y_bar, ticks):
    ist = fleet.kernels.quantize_rows(x, fleet.a["x_edges"])
    al, be, co = fleet.windows.proxy(ist)
    prob = CentralizedProblem(fleet.households, x, y_ref, y_bar, fleet.coeffs, fleet.soc.copy(), fleet.dt, al, be,
                              co, arrays=fleet.a)
    best = solve_centralized(prob)
    y_prev = float(x.sum())
    for _ in range(ticks):
        dec = fleet.tick(x, y_ref, y_prev - y_bar, update_window=False)
        y_prev = float(dec.y.sum())
    return objective(prob, dec.s_plus - dec.s_minus, dec.z) - best.objective, best, dec


def test_static_loop_converges_to_benchmark_optimum():
    # ample storage keeps the problem stationary for the whole run
    fleet, x, yr, yb = static_instance(4, capacity=1000.0, soc=500.0)
    gap, best, dec = static_gap(fleet, x, yr, yb, 20000)
    assert 0 <= gap + 1e-12 and gap <= 1e-9
    assert dec.s_plus - dec.s_minus == pytest.approx(best.s, abs=1e-6)


@pytest.mark.xfail(strict=True, reason="bin weights move O(r/D) per tick; 5000 ticks leave a 1e-3 relative gap")
def test_static_gap_within_5000_ticks():
    fleet, x, yr, yb = static_instance(5)
    gap, _, _ = static_gap(fleet, x, yr, yb, 5000)
    assert gap <= 1e-6
