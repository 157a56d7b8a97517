"""Per-household controller: local gradients, descent step, projection and the
charge-flag state machine.

:func:`hems_tick` is the reference single-household step.  :class:`Fleet`
runs the same step for every household at once on batched arrays; the
simulator uses it.  Battery direction ``flag=True`` means charging.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .core import BatteryParams, HouseholdConfig, battery_step, grid_load, quantize
from .kernels.fleet import FLEET
from .privacy import HistogramWindow, mi_proxy_gradient, mi_proxy_value, window_coefficients
from .projection import InfeasibleProjection, ProjectionProblem, default_delta, project

SOC_TOL = 1e-9


@dataclass(frozen=True)
class ControllerCoefficients:
    sigma1: float = 5.0
    sigma2: float = 1e-4
    r: float = 0.012

    def __post_init__(self):
        if self.sigma1 < 0 or self.sigma2 < 0 or self.r <= 0:
            raise ValueError("need sigma1 >= 0, sigma2 >= 0 and r > 0")


@dataclass
class HemsState:
    soc: float
    z: np.ndarray  # (m, n) current-slot bin weights, one row per consumer bin
    charge_flag: bool = True
    s_plus: float = 0.0
    s_minus: float = 0.0


@dataclass(frozen=True)
class HemsDecision:
    s_plus: float
    s_minus: float
    z_row: np.ndarray
    y: float
    flag_after: bool
    i_star: int
    proxy_value: float


def initial_z(household: HouseholdConfig) -> np.ndarray:
    """One-hot rows placing each consumer bin's centre in the matching grid bin."""
    grid = household.grid
    centres = 0.5 * (grid.x_edges[:-1] + grid.x_edges[1:])
    z = np.zeros((grid.m, grid.n))
    for i, c in enumerate(centres):
        z[i, quantize(min(max(c, household.y_min), household.y_max), grid.y_edges)] = 1.0
    return z


def initial_state(household: HouseholdConfig, soc: float, charge_flag: bool = True) -> HemsState:
    return HemsState(soc=soc, z=initial_z(household), charge_flag=charge_flag)


def local_gradients(xhat, y_prev, y_ref, e_signal, z_row, coeffs: ControllerCoefficients, mi_grad, mu,
                    s_plus_prev=0.0, s_minus_prev=0.0):
    """Gradients of the local objective in ``(s_plus, s_minus, z_row)``.

    The aggregate mismatch ``e_signal`` is the broadcast value and is held
    constant.  ``xhat`` is not needed beyond ``y_prev`` and is kept for the
    call signature.
    """
    dev = 2.0 * (y_prev - y_ref) + coeffs.sigma1 * e_signal
    g_plus = dev + coeffs.sigma2 * s_plus_prev
    g_minus = -dev + coeffs.sigma2 * s_minus_prev
    g_z = mu * np.asarray(mi_grad, dtype=float) + coeffs.sigma2 * np.asarray(z_row, dtype=float)
    return g_plus, g_minus, g_z


def local_objective(s_plus, s_minus, z_row, xhat, y_ref, e_signal, coeffs: ControllerCoefficients, mi_coeffs, mu,
                    y_linear_ref):
    """Local objective whose gradient :func:`local_gradients` returns.

    The coupling term is linearised: ``sigma1 * e_signal * (y - y_linear_ref)``.
    """
    y = grid_load(xhat, s_plus, s_minus)
    z = np.asarray(z_row, dtype=float)
    return ((y - y_ref) ** 2 + mu * mi_proxy_value(mi_coeffs, z) + coeffs.sigma1 * e_signal * (y - y_linear_ref)
            + 0.5 * coeffs.sigma2 * (s_plus ** 2 + s_minus ** 2 + z @ z))


def descent_step(prev, grad, r):
    return prev - r * grad


def hems_tick(state: HemsState, window: HistogramWindow, xhat: float, y_ref: float, e_signal: float,
              coeffs: ControllerCoefficients, household: HouseholdConfig, dt: float, update_window: bool = True):
    """One control step of a household; returns ``(decision, new_state, window)``.

    ``dt`` is the control interval in hours.  The window is updated in place
    unless ``update_window`` is false (frozen-statistics experiments).
    """
    grid, battery = household.grid, household.battery
    i_star = quantize(xhat, grid.x_edges)
    mi = window_coefficients(window, i_star)
    z_prev = state.z[i_star]
    y_prev = grid_load(xhat, state.s_plus, state.s_minus)
    g_plus, g_minus, g_z = local_gradients(
        xhat, y_prev, y_ref, e_signal, z_prev, coeffs, mi_proxy_gradient(mi, z_prev), household.mu,
        state.s_plus, state.s_minus,
    )
    flag = state.charge_flag
    s_tilde = descent_step(state.s_plus if flag else state.s_minus, g_plus if flag else g_minus, coeffs.r)
    z_tilde = descent_step(z_prev, g_z, coeffs.r)
    flip = s_tilde < 0
    problem = ProjectionProblem(
        s_tilde=s_tilde, z_tilde=z_tilde, flag=flag, xhat=xhat, e=state.soc, battery=battery, grid=grid,
        y_min=household.y_min, y_max=household.y_max, dt=dt, delta=default_delta(grid),
        s_fixed=0.0 if flip else None,
    )
    s, z = project(problem)
    if flip:
        s = 0.0
    s_plus, s_minus = (s, 0.0) if flag else (0.0, s)
    soc = _checked_soc(battery_step(state.soc, s_plus, s_minus, battery, dt), battery)
    znew = state.z.copy()
    znew[i_star] = z
    if update_window:
        window.update(i_star, z)
    new_flag = (not flag) if flip else flag
    decision = HemsDecision(s_plus, s_minus, z, grid_load(xhat, s_plus, s_minus), new_flag, i_star,
                            mi_proxy_value(mi, z))
    return decision, replace(state, soc=soc, z=znew, charge_flag=new_flag, s_plus=s_plus, s_minus=s_minus), window


def _checked_soc(soc, battery: BatteryParams):
    cap = battery.capacity
    if soc < -SOC_TOL * cap or soc > cap * (1 + SOC_TOL):
        raise RuntimeError(f"state of charge {soc} left [0, {cap}] after actuation")
    return min(max(soc, 0.0), cap)


class FleetWindows:
    """Batched sliding windows and MI-proxy rows for ``N`` households."""

    def __init__(self, N: int, m: int, n: int, capacity: int, eps: float, kernels=None):
        self.kernels = FLEET if kernels is None else kernels
        self.m, self.n, self.capacity, self.eps = m, n, capacity, eps
        k = capacity - 1
        self.counts = np.zeros((N, m, n))
        self.bins = np.zeros((N, k), dtype=np.int64)
        self.rows = np.zeros((N, k, n))
        self.head = np.zeros(N, dtype=np.int64)
        self.size = np.zeros(N, dtype=np.int64)

    @property
    def D(self) -> float:
        return self.capacity + self.eps * self.m * self.n

    def proxy(self, istar):
        return self.kernels.proxy_rows(self.counts, istar, self.eps, self.D)

    def push(self, istar, z):
        self.kernels.window_push(self.counts, self.bins, self.rows, self.head, self.size, istar, z)

    def window(self, l: int) -> HistogramWindow:
        """Materialise household ``l`` as a :class:`HistogramWindow` (copy)."""
        w = HistogramWindow(self.m, self.n, self.capacity, self.eps)
        K = self.capacity - 1
        start = (self.head[l] - self.size[l]) % K if K else 0
        for k in range(self.size[l]):
            idx = (start + k) % K
            w.update(int(self.bins[l, idx]), self.rows[l, idx])
        return w


@dataclass
class FleetDecision:
    s_plus: np.ndarray
    s_minus: np.ndarray
    z: np.ndarray
    y: np.ndarray
    flag: np.ndarray
    istar: np.ndarray
    proxy_value: np.ndarray


def household_arrays(households):
    """Stack per-household parameters into arrays used by the batched kernels."""
    ms = {h.grid.m for h in households}
    ns = {h.grid.n for h in households}
    if len(ms) != 1 or len(ns) != 1:
        raise ValueError("all households must share the same numbers of bins")
    a = {
        "x_edges": np.stack([h.grid.x_edges for h in households]),
        "y_edges": np.stack([h.grid.y_edges for h in households]),
        "mu": np.array([h.mu for h in households], dtype=float),
        "y_min": np.array([h.y_min for h in households], dtype=float),
        "y_max": np.array([h.y_max for h in households], dtype=float),
        "cap": np.array([h.battery.capacity for h in households], dtype=float),
        "smax_plus": np.array([h.battery.max_charge for h in households], dtype=float),
        "smax_minus": np.array([h.battery.max_discharge for h in households], dtype=float),
        "eta": np.array([h.battery.efficiency for h in households], dtype=float),
    }
    a["lo"] = np.ascontiguousarray(a["y_edges"][:, :-1])
    a["hi"] = np.ascontiguousarray(a["y_edges"][:, 1:])
    a["delta"] = 1e-9 * np.min(np.diff(a["y_edges"], axis=1), axis=1)
    return a


def s_bounds(a, flag, xhat, soc, dt, fixed_zero=None):
    """Batched feasible interval of ``s``; ``flag=None`` gives signed net power."""
    room_up = (a["cap"] - soc) / (dt * a["eta"])
    room_down = soc * a["eta"] / dt
    if flag is None:
        lo = np.maximum.reduce([-a["smax_minus"], -room_down, a["y_min"] - xhat])
        hi = np.minimum.reduce([a["smax_plus"], room_up, a["y_max"] - xhat])
    else:
        lo = np.where(flag, np.maximum(0.0, a["y_min"] - xhat), np.maximum(0.0, xhat - a["y_max"]))
        hi = np.where(flag, np.minimum.reduce([a["smax_plus"], room_up, a["y_max"] - xhat]),
                      np.minimum.reduce([a["smax_minus"], room_down, xhat - a["y_min"]]))
    if fixed_zero is not None and np.any(fixed_zero):
        ok = (lo <= 1e-9) & (hi >= -1e-9)
        bad = fixed_zero & ~ok
        if np.any(bad):
            l = int(np.flatnonzero(bad)[0])
            raise InfeasibleProjection(f"household {l}: zero battery power outside [{lo[l]}, {hi[l]}]")
        lo = np.where(fixed_zero, 0.0, lo)
        hi = np.where(fixed_zero, 0.0, hi)
    bad = lo > hi
    if np.any(bad):
        l = int(np.flatnonzero(bad)[0])
        raise InfeasibleProjection(
            f"household {l}: battery power interval [{lo[l]}, {hi[l]}] is empty (xhat={xhat[l]}, soc={soc[l]})")
    return lo, hi


def solve_households(a, h, g, d, xhat, lo, hi, kernels=None):
    """Solve every household QP; raises on the first failing household."""
    kernels = FLEET if kernels is None else kernels
    N, nv = g.shape
    v = np.empty((N, nv))
    lam = np.empty((N, nv + 4))
    status = np.empty(N, dtype=np.int64)
    kernels.solve_fleet(h, g, d, xhat, lo, hi, a["lo"], a["hi"], a["delta"], v, lam, status)
    if np.any(status != 0):
        l = int(np.flatnonzero(status != 0)[0])
        raise InfeasibleProjection(f"household {l}: QP status {int(status[l])} (xhat={xhat[l]}, s in [{lo[l]}, {hi[l]}])")
    return v, lam


class Fleet:
    """Distributed controllers of all households, advanced one tick at a time."""

    def __init__(self, households, coeffs: ControllerCoefficients, soc0, dt: float, capacity: int = 901,
                 eps: float = 0.1, kernels=None):
        self.households = list(households)
        self.coeffs = coeffs
        self.dt = dt
        self.kernels = FLEET if kernels is None else kernels
        self.a = household_arrays(self.households)
        N = len(self.households)
        m, n = self.households[0].grid.m, self.households[0].grid.n
        self.windows = FleetWindows(N, m, n, capacity, eps, self.kernels)
        self.soc = np.broadcast_to(np.asarray(soc0, dtype=float), (N,)).copy()
        self.flag = np.ones(N, dtype=bool)
        self.s_plus = np.zeros(N)
        self.s_minus = np.zeros(N)
        self.Z = np.stack([initial_z(h) for h in self.households])
        self._ar = np.arange(N)
        self._h = np.ones((N, n + 1))

    @property
    def N(self) -> int:
        return len(self.households)

    def state(self, l: int) -> HemsState:
        return HemsState(float(self.soc[l]), self.Z[l].copy(), bool(self.flag[l]), float(self.s_plus[l]),
                         float(self.s_minus[l]))

    def tick(self, xhat, y_ref, e_signal: float, update_window: bool = True) -> FleetDecision:
        a, c, k = self.a, self.coeffs, self.kernels
        xhat = np.asarray(xhat, dtype=float)
        istar = k.quantize_rows(xhat, a["x_edges"])
        alpha, beta, const = self.windows.proxy(istar)
        z_prev = self.Z[self._ar, istar]
        dev = 2.0 * (xhat + self.s_plus - self.s_minus - y_ref) + c.sigma1 * e_signal
        flag = self.flag
        g_s = np.where(flag, dev + c.sigma2 * self.s_plus, -dev + c.sigma2 * self.s_minus)
        g_z = a["mu"][:, None] * (beta + 2.0 * alpha * z_prev) + c.sigma2 * z_prev
        s_tilde = np.where(flag, self.s_plus, self.s_minus) - c.r * g_s
        z_tilde = z_prev - c.r * g_z
        flip = s_tilde < 0
        lo, hi = s_bounds(a, flag, xhat, self.soc, self.dt, fixed_zero=flip)
        g = -np.concatenate((s_tilde[:, None], z_tilde), axis=1)
        d = np.where(flag, 1.0, -1.0)
        v, _ = solve_households(a, self._h, g, d, xhat, lo, hi, k)
        s = np.where(flip, 0.0, v[:, 0])
        z = np.maximum(v[:, 1:], 0.0)
        self.s_plus = np.where(flag, s, 0.0)
        self.s_minus = np.where(flag, 0.0, s)
        soc = self.soc + self.dt * (a["eta"] * self.s_plus - self.s_minus / a["eta"])
        if np.any(soc < -SOC_TOL * a["cap"]) or np.any(soc > a["cap"] * (1 + SOC_TOL)):
            l = int(np.flatnonzero((soc < -SOC_TOL * a["cap"]) | (soc > a["cap"] * (1 + SOC_TOL)))[0])
            raise RuntimeError(f"household {l}: state of charge {soc[l]} left [0, {a['cap'][l]}]")
        self.soc = np.clip(soc, 0.0, a["cap"])
        self.Z[self._ar, istar] = z
        if update_window:
            self.windows.push(istar, z)
        self.flag = np.where(flip, ~flag, flag)
        proxy = const + np.sum(beta * z + alpha * z * z, axis=1)
        return FleetDecision(self.s_plus.copy(), self.s_minus.copy(), z, xhat + self.s_plus - self.s_minus,
                             self.flag.copy(), istar, proxy)
