"""Acceptance suite: one PASS/FAIL verdict per criterion.

Long scenario runs are cached per module and shared between criteria.
Criteria that this reproduction does not meet are marked strict xfail, so
the verdict stays FAIL and a silent fix would be flagged.
"""
import time
from dataclasses import replace

import numpy as np
import pytest

import conftest
from helpers import random_projection
from oracles import dykstra_project
from privagg.aggregator import generate_target
from privagg.hems import ControllerCoefficients, Fleet, local_gradients, local_objective
from privagg.metrics import mi_iid, mi_markov
from privagg.privacy import HistogramWindow, gradient_bound, mi_proxy_gradient, window_coefficients
from privagg.projection import InfeasibleProjection, project, s_interval
from privagg.sim.config import ScenarioConfig
from privagg.sim.results import emit_results
from privagg.sim.runner import build_scenario, frozen_convergence, run_benchmark, run_scenario

RUNS = {}
DEFAULTS = ScenarioConfig()


def verdict(number, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}"
    conftest.VERDICTS.append(line)
    print(line)
    return ok


def scenario_run(seed, mode="distributed", **changes):
    changes = {k: v for k, v in changes.items() if getattr(DEFAULTS, k) != v}
    key = (seed, mode, tuple(sorted(changes.items())))
    if key not in RUNS:
        sc = build_scenario(ScenarioConfig(seed=seed, **changes))
        RUNS[key] = (sc, run_scenario(sc) if mode == "distributed" else run_benchmark(sc))
    return RUNS[key][1]


@pytest.mark.xfail(strict=True, reason="bin weights relax O(r/D) per tick; 1e-3 needs 2.8k to 5.6k ticks")
def test_1_static_convergence():
    gaps, slow = [], 0.0
    for seed in range(5):
        sc = build_scenario(ScenarioConfig(households=5, horizon=3600, discard=0, seed=seed))
        cfg = sc.config
        fleet = Fleet(sc.households, sc.coeffs, cfg.soc0, cfg.control_dt / 3600, capacity=cfg.window, eps=cfg.eps)
        # fill the windows with a realistic history before freezing the inputs
        y_prev = float(sc.x[:, 0].sum())
        for t in range(900):
            y_prev = float(fleet.tick(sc.x[:, t], sc.y_ref[:, t], y_prev - sc.y_bar[t]).y.sum())
        start = time.perf_counter()
        gap, _ = frozen_convergence(fleet, sc.x[:, 900], sc.y_ref[:, 900], float(sc.y_bar[900]), 2000)
        slow = max(slow, time.perf_counter() - start)
        gaps.append(float(gap.min()))
    ok = max(gaps) <= 1e-3 and slow < 10
    verdict(1, ok, f"best relative gap within 2000 ticks per seed {np.round(gaps, 5).tolist()}, "
                   f"slowest {slow:.2f} s")
    assert ok


def _filled_window(rng, m, n, capacity):
    w = HistogramWindow(m, n, capacity)
    for _ in range(capacity - 1):
        w.update(int(rng.integers(m)), rng.dirichlet(np.ones(n)))
    return w


def test_2_gradient_correctness():
    rng = np.random.default_rng(2)
    worst = 0.0
    for _ in range(100):
        m, n = int(rng.integers(2, 16)), int(rng.integers(2, 16))
        mi = window_coefficients(_filled_window(rng, m, n, int(rng.integers(5, 300))), int(rng.integers(m)))
        c = ControllerCoefficients(float(rng.uniform(0, 10)), float(rng.uniform(0, 1e-2)), 0.012)
        mu = float(rng.uniform(0, 20))
        xhat, y_ref, e = rng.uniform(0, 3), rng.uniform(0, 3), rng.normal()
        sp, sm = (rng.uniform(0, 3), 0.0) if rng.uniform() < 0.5 else (0.0, rng.uniform(0, 3))
        z = rng.uniform(0, 1, n)
        y_lin = xhat + sp - sm
        gp, gm, gz = local_gradients(xhat, y_lin, y_ref, e, z, c, mi_proxy_gradient(mi, z), mu, sp, sm)
        an = np.concatenate(([gp, gm], gz))
        f = lambda a, b, zz: local_objective(a, b, zz, xhat, y_ref, e, c, mi, mu, y_lin)  # noqa: E731
        h = 1e-5
        fd = [(f(sp + h, sm, z) - f(sp - h, sm, z)) / (2 * h), (f(sp, sm + h, z) - f(sp, sm - h, z)) / (2 * h)]
        fd += [(f(sp, sm, z + h * u) - f(sp, sm, z - h * u)) / (2 * h) for u in np.eye(n)]
        worst = max(worst, float(np.max(np.abs(np.array(fd) - an) / np.maximum(np.abs(an), 1e-3))))
    assert verdict(2, worst <= 1e-5, f"max relative finite-difference error {worst:.2e} over 100 instances")


def test_3_projection_oracle():
    rng = np.random.default_rng(3)
    worst = idem = 0.0
    expansive = 0
    count = 0
    while count < 200:
        p = random_projection(rng)
        try:
            lo, hi = s_interval(p.flag, p.xhat, p.e, p.battery, p.y_min, p.y_max, p.dt, p.s_fixed)
        except InfeasibleProjection:
            continue
        count += 1
        ye = p.grid.y_edges
        s, z = project(p)
        so, zo = dykstra_project(p.s_tilde, p.z_tilde, p.direction, p.xhat, lo, hi, ye[:-1], ye[1:], p.tolerance)
        worst = max(worst, float(np.hypot(s - so, np.linalg.norm(z - zo))))
        s2, z2 = project(replace(p, s_tilde=s, z_tilde=z))
        idem = max(idem, abs(s2 - s), float(np.max(np.abs(z2 - z))))
        q = replace(p, s_tilde=p.s_tilde + rng.normal(), z_tilde=p.z_tilde + rng.normal(0, 0.5, p.z_tilde.size))
        sq, zq = project(q)
        d_in = np.hypot(p.s_tilde - q.s_tilde, np.linalg.norm(p.z_tilde - q.z_tilde))
        expansive += np.hypot(s - sq, np.linalg.norm(z - zq)) > d_in + 1e-9
    ok = worst <= 1e-6 and idem <= 1e-9 and expansive == 0
    assert verdict(3, ok, f"oracle distance {worst:.1e}, idempotence {idem:.1e}, "
                          f"{expansive} expansive pairs over {count} instances")


def test_4_mi_proxy_properties():
    rng = np.random.default_rng(4)
    positive, within = True, 0
    for _ in range(10_000):
        m, n = int(rng.integers(2, 16)), int(rng.integers(2, 16))
        cap = int(rng.integers(1, 120))
        w = HistogramWindow(m, n, cap, 0.1)
        for _ in range(int(rng.integers(0, cap + 1))):
            w.update(int(rng.integers(m)), rng.dirichlet(np.full(n, 0.3)))
        c = window_coefficients(w, int(rng.integers(m)))
        positive &= bool(np.all(c.alpha > 0))
        z = rng.uniform(0, 1, n)
        bound = c.s_weight * np.log2(w.D / w.eps) + 2 * c.alpha
        within += bool(np.all(np.abs(mi_proxy_gradient(c, z)) <= bound * (1 + 1e-12)))
        assert np.allclose(bound, gradient_bound(c, w.eps))
    w = HistogramWindow(1, 6, 30, 0.1)
    for _ in range(20):
        w.update(0, rng.dirichlet(np.ones(6)))
    flat = window_coefficients(w, 0)
    single = bool(np.all(flat.alpha == 0) and np.all(flat.beta == 0))
    ok = positive and within == 10_000 and single
    assert verdict(4, ok, f"alpha > 0 on all windows: {positive}, gradient bound on {within}/10000, "
                          f"m=1 exactly flat: {single}")


def test_5_mi_estimator_oracles():
    coin = np.tile([0.0, 1.0], 500)
    rng = np.random.default_rng(5)
    x = np.repeat([0.0, 1.0], 4)
    y = np.tile([0.0, 1.0], 4)
    xs = rng.integers(0, 2, 100_000).astype(float)
    ys = np.where(rng.uniform(size=xs.size) < 0.8, xs, 1 - xs)
    checks = {
        "coin": mi_iid(coin, coin, 2, 2) == 1.0,
        "product": mi_iid(x, y, 2, 2) == 0.0,
        "alternation": abs(mi_markov(coin, coin, 2, 2)) <= 1e-12,
        "iid": abs(mi_markov(xs, ys, 2, 2) - mi_iid(xs, ys, 2, 2)) <= 0.05,
    }
    assert verdict(5, all(checks.values()), ", ".join(f"{k} {'ok' if v else 'off'}" for k, v in checks.items()))


def test_6_tracking_order():
    pairs = [(scenario_run(s).report(1).nrmse, scenario_run(s, "benchmark").report(1).nrmse) for s in range(5)]
    ok = all(d > b for d, b in pairs)
    assert verdict(6, ok, "NRMSE % distributed vs benchmark per seed "
                          + ", ".join(f"{d:.2f}>{b:.2f}" for d, b in pairs))


@pytest.mark.xfail(strict=True, reason="sigma1=7 puts the common-mode pole at -0.70 and rings on load steps")
def test_7a_nrmse_over_sigma1():
    table = [[scenario_run(s, sigma1=v).report(1).nrmse for v in (3.0, 5.0, 7.0)] for s in range(3)]
    votes = sum(a >= b >= c for a, b, c in table)
    ok = votes >= 2
    verdict("7a", ok, f"NRMSE % over sigma1 3/5/7 per seed {np.round(table, 3).tolist()}, "
                      f"{votes}/3 non-increasing")
    assert ok


def test_7b_privacy_price_lowers_leakage():
    rows = [(scenario_run(s, mu_min=11, mu_max=19).report(1).average("i_iid"),
             scenario_run(s, mu=(0.0,) * 20).report(1).average("i_iid")) for s in range(3)]
    votes = sum(a < b for a, b in rows)
    assert verdict("7b", votes >= 2, "average I_iid mu in [11,19] vs mu=0 per seed "
                                     + ", ".join(f"{a:.4f}<{b:.4f}" for a, b in rows) + f", {votes}/3")


def test_9_target_generator():
    gamma = 1.0
    windows = 278  # 360 samples of 5 s per half hour, just over 1e5 samples
    tgt = generate_target(np.zeros(windows), gamma, 5.0, np.random.default_rng(9).integers(2 ** 31))
    delta = tgt.values - tgt.base
    bias = np.abs(delta.reshape(windows, 360).mean(axis=1)).max() / gamma
    inside = float(np.mean(np.abs(delta) <= gamma))
    ok = bias <= 1e-3 and inside >= 0.99
    assert verdict(9, ok, f"worst window bias {bias:.1e} of gamma, {100 * inside:.2f}% of {delta.size} "
                          "samples within gamma")


def test_10_determinism_and_performance(tmp_path):
    first = scenario_run(0)
    again = run_scenario(ScenarioConfig(seed=0))
    emit_results(first, tmp_path / "a")
    emit_results(again, tmp_path / "b")
    same = (tmp_path / "a" / "traces.csv").read_bytes() == (tmp_path / "b" / "traces.csv").read_bytes()
    ok = same and again.wall_clock < 60 and again.ticks == 14400 and again.x.shape[0] == 20
    assert verdict(10, ok, f"traces.csv byte-identical: {same}, N=20 x 14400 ticks in {again.wall_clock:.1f} s")


def test_8_battery_discipline():
    scenario_run(0)
    worst = {"overlap": 0.0, "soc": 0.0, "reversals": 0}
    for sc, res in RUNS.values():
        cap = sc.config.capacity
        worst["overlap"] = max(worst["overlap"], float(np.max(res.s_plus * res.s_minus)))
        worst["soc"] = max(worst["soc"], float(np.max(-res.soc)), float(np.max(res.soc - cap)))
        net = res.s_plus - res.s_minus
        worst["reversals"] += int(np.sum(net[:, :-1] * net[:, 1:] < 0))
    ok = worst["overlap"] == 0 and worst["soc"] <= 0 and worst["reversals"] == 0
    assert verdict(8, ok, f"{len(RUNS)} runs: max s+*s- {worst['overlap']}, SoC excursion {worst['soc']:.1e}, "
                          f"{worst['reversals']} direct reversals")
