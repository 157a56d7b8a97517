"""Euclidean projection onto a household's feasible set.

The decision is ``(s, z)`` where ``s >= 0`` is the battery power in the
direction allowed by the charge flag (``+1`` charge, ``-1`` discharge) and
``z`` is the fractional grid-bin row of the current consumer bin.  The grid
load is ``y = xhat + d*s``.  With ``flag=None`` the direction is left free and
``s`` is the signed net battery power (used by the centralised benchmark).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import BatteryParams, QuantizationGrid
from .kernels import qp

FEAS_TOL = 1e-9


class InfeasibleProjection(ValueError):
    """The household feasible set is empty."""


@dataclass(frozen=True)
class ProjectionProblem:
    s_tilde: float
    z_tilde: np.ndarray
    flag: bool | None
    xhat: float
    e: float
    battery: BatteryParams
    grid: QuantizationGrid
    y_min: float
    y_max: float
    dt: float  # hours
    delta: float | None = None
    s_fixed: float | None = None

    @property
    def direction(self) -> float:
        return -1.0 if self.flag is False else 1.0

    @property
    def tolerance(self) -> float:
        return 1e-9 * float(np.min(np.diff(self.grid.y_edges))) if self.delta is None else self.delta


def default_delta(grid: QuantizationGrid) -> float:
    return 1e-9 * float(np.min(np.diff(grid.y_edges)))


def s_interval(flag, xhat, e, battery: BatteryParams, y_min, y_max, dt, s_fixed=None):
    """Feasible range of ``s`` from power, state-of-charge and grid-load limits."""
    eta = battery.efficiency
    room_up = (battery.capacity - e) / (dt * eta) if dt > 0 else np.inf
    room_down = e * eta / dt if dt > 0 else np.inf
    if flag is None:
        lo = max(-battery.max_discharge, -room_down, y_min - xhat)
        hi = min(battery.max_charge, room_up, y_max - xhat)
    elif flag:
        lo = max(0.0, y_min - xhat)
        hi = min(battery.max_charge, room_up, y_max - xhat)
    else:
        lo = max(0.0, xhat - y_max)
        hi = min(battery.max_discharge, room_down, xhat - y_min)
    if s_fixed is not None:
        if not lo - FEAS_TOL <= s_fixed <= hi + FEAS_TOL:
            raise InfeasibleProjection(
                f"fixed battery power {s_fixed} outside feasible interval [{lo}, {hi}] "
                f"(xhat={xhat}, y in [{y_min}, {y_max}])"
            )
        lo = hi = s_fixed
    if lo > hi:
        raise InfeasibleProjection(
            f"battery power interval [{lo}, {hi}] is empty "
            f"(flag={flag}, xhat={xhat}, soc={e}, y in [{y_min}, {y_max}])"
        )
    return lo, hi


def solve_household_qp(h, g, problem: ProjectionProblem):
    """Minimise ``0.5*sum(h v^2) + g v`` over the problem's feasible set.

    Returns ``(v, lam)`` with ``v = (s, z...)`` and the constraint multipliers
    ordered as in :func:`privagg.kernels.qp.constraint_matrix`.
    """
    grid = problem.grid
    lo_s, hi_s = s_interval(
        problem.flag, problem.xhat, problem.e, problem.battery, problem.y_min, problem.y_max, problem.dt, problem.s_fixed
    )
    n = grid.n
    v = np.empty(n + 1)
    lam = np.empty(n + 5)
    status = qp.solve_household(
        np.asarray(h, dtype=float),
        np.asarray(g, dtype=float),
        problem.direction,
        float(problem.xhat),
        lo_s,
        hi_s,
        grid.y_edges[:-1].copy(),
        grid.y_edges[1:].copy(),
        problem.tolerance,
        v,
        lam,
    )
    if status == qp.INFEASIBLE:
        raise InfeasibleProjection(
            f"no grid-bin weights can cover y in [{problem.xhat + problem.direction * lo_s}, "
            f"{problem.xhat + problem.direction * hi_s}] (bins span [{grid.y_edges[0]}, {grid.y_edges[-1]}])"
        )
    if status != qp.OK:
        raise RuntimeError(f"household QP did not converge (status {status})")
    return v, lam


def project(problem: ProjectionProblem):
    """Project ``(s_tilde, z_tilde)``; returns ``(s, z)``."""
    z_t = np.asarray(problem.z_tilde, dtype=float)
    v, _ = solve_household_qp(np.ones(z_t.size + 1), -np.concatenate(([problem.s_tilde], z_t)), problem)
    z = np.maximum(v[1:], 0.0)
    return float(v[0]), z


def constraint_system(problem: ProjectionProblem):
    """``(A, b)`` of the feasible set, row 0 being the simplex equality."""
    lo_s, hi_s = s_interval(
        problem.flag, problem.xhat, problem.e, problem.battery, problem.y_min, problem.y_max, problem.dt, problem.s_fixed
    )
    ye = problem.grid.y_edges
    return qp.constraint_matrix(
        problem.direction, float(problem.xhat), lo_s, hi_s, ye[:-1].copy(), ye[1:].copy(), problem.tolerance
    )


def feasible_check(point, problem: ProjectionProblem, tol: float = FEAS_TOL):
    """Check ``point = (s, z)`` against every household constraint.

    Returns ``(ok, violations)`` where ``violations`` names the failed groups.
    """
    s, z = point
    z = np.asarray(z, dtype=float)
    d = problem.direction
    b = problem.battery
    y = problem.xhat + d * s
    ye = problem.grid.y_edges
    bad = []
    if problem.flag is not None and s < -tol:
        bad.append("nonnegativity of battery power")
    if problem.flag is None:
        smax_up, smax_down = b.max_charge, b.max_discharge
        if s > smax_up + tol or -s > smax_down + tol:
            bad.append("battery power rating")
    elif s > (b.max_charge if problem.flag else b.max_discharge) + tol:
        bad.append("battery power rating")
    if problem.s_fixed is not None and abs(s - problem.s_fixed) > tol:
        bad.append("fixed battery power")
    sp, sm = (max(s, 0.0), max(-s, 0.0)) if d > 0 else (0.0, s)
    e_next = problem.e + problem.dt * (b.efficiency * sp - sm / b.efficiency)
    if e_next < -tol or e_next > b.capacity + tol:
        bad.append("state-of-charge bounds")
    if y < problem.y_min - tol or y > problem.y_max + tol:
        bad.append("grid-load bounds")
    if np.any(z < -tol):
        bad.append("nonnegativity of bin weights")
    if abs(z.sum() - 1.0) > tol:
        bad.append("simplex equality")
    if y < z @ ye[:-1] - tol or y > z @ ye[1:] - problem.tolerance + tol:
        bad.append("grid-load/bin-weight linking")
    return not bad, bad


def kkt_residual(h, g, A, b, v, lam, n_eq=1) -> float:
    """Largest violation among stationarity, feasibility and complementarity."""
    h, g, v, lam = (np.asarray(a, dtype=float) for a in (h, g, v, lam))
    stat = np.max(np.abs(h * v + g - A.T @ lam))
    slack = A @ v - b
    primal = max(np.max(np.abs(slack[:n_eq])), np.max(np.maximum(-slack[n_eq:], 0.0)))
    dual = np.max(np.maximum(-lam[n_eq:], 0.0))
    comp = np.max(np.abs(lam[n_eq:] * slack[n_eq:]))
    return float(max(stat, primal, dual, comp))
