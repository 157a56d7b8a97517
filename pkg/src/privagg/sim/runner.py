"""Tick loops for the distributed scheme and the full-information benchmark."""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from ..aggregator import HALF_HOUR, generate_day_ahead, generate_target, TargetProfile
from ..centralized import CentralizedProblem, flips_wanted, objective, solve_centralized
from ..core import BatteryParams, HouseholdConfig, QuantizationGrid, TimingConfig, default_y_max
from ..hems import ControllerCoefficients, Fleet, FleetWindows, household_arrays
from ..kernels.fleet import FLEET
from ..metrics import MetricsReport, evaluate
from .config import ScenarioConfig
from .ingest import ingest_traces
from .synthetic import synthetic_load


class SimulationError(RuntimeError):
    pass


@dataclass
class Scenario:
    config: ScenarioConfig
    households: list
    x: np.ndarray  # (N, T) true consumer load
    y_ref: np.ndarray  # (N, T) schedule per tick
    target: TargetProfile
    y_bar: np.ndarray  # (T,) target per tick
    timing: TimingConfig
    coeffs: ControllerCoefficients

    @property
    def N(self) -> int:
        return self.x.shape[0]

    @property
    def ticks(self) -> int:
        return self.x.shape[1]


def _load_matrix(cfg: ScenarioConfig, ticks: int) -> np.ndarray:
    if cfg.traces is None:
        seeds = np.random.SeedSequence(cfg.sub_seed("trace")).spawn(cfg.households)
        return np.stack([synthetic_load(s, ticks, cfg.start_hour) for s in seeds])
    traces = ingest_traces(cfg.traces, cfg.households, cfg.sub_seed("trace"), dt=cfg.control_dt)
    offset = int(round(cfg.start_hour * 3600 / cfg.control_dt))
    rows = []
    for tr in traces:
        start = offset if len(tr) >= offset + ticks else 0
        if len(tr) < start + ticks:
            raise ValueError(f"trace {tr.household_id!r} covers {len(tr)} ticks, scenario needs {ticks}")
        rows.append(tr.values[start:start + ticks])
    return np.stack(rows)


def build_scenario(cfg: ScenarioConfig, x: np.ndarray | None = None) -> Scenario:
    """Households, loads, schedules and target of ``cfg``.

    ``x`` overrides the consumer loads (``(N, T)`` kW at ``control_dt``).
    """
    timing = TimingConfig(cfg.horizon, cfg.control_dt, cfg.forecast_dt, cfg.target_dt, cfg.discard)
    T = timing.ticks
    x = _load_matrix(cfg, T) if x is None else np.asarray(x, dtype=float)
    if x.shape != (cfg.households, T):
        raise ValueError(f"load matrix has shape {x.shape}, expected {(cfg.households, T)}")
    battery = BatteryParams(cfg.capacity, cfg.max_charge, cfg.max_discharge, cfg.efficiency)
    mu = cfg.prices()
    households, per_tick = [], []
    t_sec = np.arange(T) * cfg.control_dt
    for l in range(cfg.households):
        y_max = default_y_max(x[l], battery)
        x_max = max(float(x[l].max()), 1e-3)
        grid = QuantizationGrid.uniform(x_max, 0.0, y_max, cfg.m, cfg.n)
        schedule = generate_day_ahead(x[l], dt=cfg.control_dt)
        hh = HouseholdConfig(battery, grid, schedule, float(mu[l]), 0.0, y_max, cfg.reserve)
        households.append(hh)
        per_tick.append(schedule[np.minimum((t_sec // hh.schedule_dt).astype(int), schedule.size - 1)])
    y_ref = np.stack(per_tick)
    base = np.sum([h.day_ahead for h in households], axis=0)
    # whole schedule windows keep each one energy neutral; a partial tail is truncated
    padded = np.ceil(cfg.horizon / HALF_HOUR - 1e-9) * HALF_HOUR
    target = generate_target(base, cfg.households * cfg.reserve, cfg.target_dt, cfg.sub_seed("target"),
                             horizon=padded, correlation_time=cfg.correlation_time)
    y_bar = target.values[(t_sec // cfg.target_dt).astype(int)]
    coeffs = ControllerCoefficients(cfg.sigma1, cfg.sigma2, cfg.r)
    return Scenario(cfg, households, x, y_ref, target, y_bar, timing, coeffs)


@dataclass
class RunResults:
    """Per-tick traces, post-discard metrics and timing of one run."""

    x: np.ndarray
    xhat: np.ndarray
    y: np.ndarray
    y_ref: np.ndarray
    s_plus: np.ndarray
    s_minus: np.ndarray
    soc: np.ndarray
    istar: np.ndarray
    mi: np.ndarray
    y_hat: np.ndarray
    y_bar: np.ndarray
    e_signal: np.ndarray
    discard: int
    mode: str
    metrics: dict = field(default_factory=dict)  # resolution (s) -> MetricsReport
    wall_clock: float = 0.0

    @property
    def ticks(self) -> int:
        return self.y_hat.size

    def compute_metrics(self, resolutions=(1,), m: int = 15, n: int = 15, dt: float = 1.0) -> dict:
        k = self.discard
        for res in resolutions:
            factor = int(round(res / dt))
            self.metrics[res] = evaluate(self.x[:, k:], self.y[:, k:], self.y_ref[:, k:], self.y_hat[k:],
                                         self.y_bar[k:], factor, m, n, dt)
        return self.metrics

    def report(self, resolution=None) -> MetricsReport:
        if resolution is None:
            resolution = min(self.metrics)
        return self.metrics[resolution]


def _empty(N, T, mode, discard, x, y_ref, y_bar):
    f = lambda: np.zeros((N, T))  # noqa: E731
    return RunResults(x=x, xhat=f(), y=f(), y_ref=y_ref, s_plus=f(), s_minus=f(), soc=f(),
                      istar=np.zeros((N, T), dtype=np.int64), mi=f(), y_hat=np.zeros(T), y_bar=y_bar,
                      e_signal=np.zeros(T), discard=discard, mode=mode)


def run_scenario(scenario: Scenario | ScenarioConfig, kernels=None, metrics: bool = True) -> RunResults:
    """Closed loop of the distributed controllers against the measured aggregate."""
    sc = scenario if isinstance(scenario, Scenario) else build_scenario(scenario)
    cfg, tm = sc.config, sc.timing
    N, T = sc.N, sc.ticks
    started = time.perf_counter()
    fleet = Fleet(sc.households, sc.coeffs, cfg.soc0, tm.dt_hours, cfg.window, cfg.eps, kernels)
    res = _empty(N, T, "distributed", int(round(tm.discard / tm.control_dt)), sc.x, sc.y_ref, sc.y_bar)
    noise = _noise(cfg, T)
    hold = tm.forecast_every
    y_hat_prev = float(sc.x[:, 0].sum())
    xhat = sc.x[:, 0]
    for t in range(T):
        if t % hold == 0:
            xhat = sc.x[:, t]
        e = y_hat_prev - sc.y_bar[t]
        try:
            dec = fleet.tick(xhat, sc.y_ref[:, t], e)
        except Exception as exc:
            raise SimulationError(f"tick {t}: {exc}") from exc
        y = sc.x[:, t] + dec.s_plus - dec.s_minus
        y_hat_prev = float(y.sum()) + noise[t]
        res.xhat[:, t] = xhat
        res.y[:, t] = y
        res.s_plus[:, t] = dec.s_plus
        res.s_minus[:, t] = dec.s_minus
        res.soc[:, t] = fleet.soc
        res.istar[:, t] = dec.istar
        res.mi[:, t] = dec.proxy_value
        res.y_hat[t] = y_hat_prev
        res.e_signal[t] = e
    res.wall_clock = time.perf_counter() - started
    if metrics:
        res.compute_metrics(cfg.resolutions, cfg.m, cfg.n, cfg.control_dt)
    return res


def _noise(cfg: ScenarioConfig, T: int) -> np.ndarray:
    if cfg.noise_std <= 0:
        return np.zeros(T)
    return np.random.default_rng(cfg.sub_seed("noise")).normal(0.0, cfg.noise_std, T)


def run_benchmark(scenario: Scenario | ScenarioConfig, kernels=None, metrics: bool = True,
                  certified: bool = False) -> RunResults:
    """Full-information benchmark: the coupled problem solved exactly every tick.

    Each tick uses the true loads and the exact aggregate.  Charge flags
    follow the same discipline as the distributed controllers: a battery
    pinned at zero whose optimum lies in the other direction switches mode
    for the next tick.
    """
    sc = scenario if isinstance(scenario, Scenario) else build_scenario(scenario)
    cfg, tm = sc.config, sc.timing
    N, T = sc.N, sc.ticks
    kernels = FLEET if kernels is None else kernels
    started = time.perf_counter()
    a = household_arrays(sc.households)
    m, n = cfg.m, cfg.n
    windows = FleetWindows(N, m, n, cfg.window, cfg.eps, kernels)
    res = _empty(N, T, "benchmark", int(round(tm.discard / tm.control_dt)), sc.x, sc.y_ref, sc.y_bar)
    noise = _noise(cfg, T)
    soc = np.full(N, float(cfg.soc0))
    flag = np.ones(N, dtype=bool)
    price = None
    dt = tm.dt_hours
    for t in range(T):
        x = sc.x[:, t]
        istar = kernels.quantize_rows(x, a["x_edges"])
        alpha, beta, const = windows.proxy(istar)
        prob = CentralizedProblem(sc.households, x, sc.y_ref[:, t], float(sc.y_bar[t]), sc.coeffs, soc, dt,
                                  alpha, beta, const, flags=flag, arrays=a)
        try:
            sol = solve_centralized(prob, price0=price, certified=certified)
        except Exception as exc:
            raise SimulationError(f"tick {t}: {exc}") from exc
        price = sol.price
        s_plus = np.where(flag, sol.s, 0.0)
        s_minus = np.where(flag, 0.0, sol.s)
        soc = np.clip(soc + dt * (a["eta"] * s_plus - s_minus / a["eta"]), 0.0, a["cap"])
        windows.push(istar, sol.z)
        flag = np.where(flips_wanted(prob, sol), ~flag, flag)
        y = x + s_plus - s_minus
        res.xhat[:, t] = x
        res.y[:, t] = y
        res.s_plus[:, t] = s_plus
        res.s_minus[:, t] = s_minus
        res.soc[:, t] = soc
        res.istar[:, t] = istar
        res.mi[:, t] = const + np.sum(beta * sol.z + alpha * sol.z * sol.z, axis=1)
        res.y_hat[t] = float(y.sum()) + noise[t]
        res.e_signal[t] = res.y_hat[t - 1] - sc.y_bar[t] if t else float(x.sum()) - sc.y_bar[t]
    res.wall_clock = time.perf_counter() - started
    if metrics:
        res.compute_metrics(cfg.resolutions, cfg.m, cfg.n, cfg.control_dt)
    return res


def frozen_convergence(fleet: Fleet, x, y_ref, y_bar: float, ticks: int):
    """Iterate the distributed loop on constant inputs with frozen windows.

    Returns ``(gap, solution)``: the relative objective gap to the
    benchmark optimum after every tick, and that optimum.  Battery
    directions are left free in the benchmark since the controllers may
    switch mode.
    """
    x = np.asarray(x, dtype=float)
    y_ref = np.asarray(y_ref, dtype=float)
    istar = fleet.kernels.quantize_rows(x, fleet.a["x_edges"])
    alpha, beta, const = fleet.windows.proxy(istar)
    prob = CentralizedProblem(fleet.households, x, y_ref, y_bar, fleet.coeffs, fleet.soc.copy(), fleet.dt,
                              alpha, beta, const, flags=None, arrays=fleet.a)
    best = solve_centralized(prob)
    scale = max(abs(best.objective), 1e-12)
    gap = np.empty(ticks)
    y_hat_prev = float(x.sum())
    for t in range(ticks):
        dec = fleet.tick(x, y_ref, y_hat_prev - y_bar, update_window=False)
        y_hat_prev = float(dec.y.sum())
        gap[t] = (objective(prob, dec.s_plus - dec.s_minus, dec.z) - best.objective) / scale
    return gap, best
