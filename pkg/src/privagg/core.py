"""Physical and configuration types shared by every module.

Units: power in kW, energy in kWh.  Time steps handed to the battery model are
in hours (1 s = 1/3600 h).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

SECONDS_PER_HOUR = 3600.0


@dataclass(frozen=True)
class LoadTrace:
    """Consumer power series of one household on a uniform grid."""

    household_id: str
    values: np.ndarray
    start_time: float = 0.0
    dt: float = 1.0

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1 or values.size < 1:
            raise ValueError("LoadTrace needs a non-empty 1-D series")
        if not np.all(np.isfinite(values)) or np.any(values < 0):
            raise ValueError(f"LoadTrace {self.household_id!r}: values must be finite and >= 0")
        if self.dt <= 0:
            raise ValueError("LoadTrace.dt must be positive")
        object.__setattr__(self, "values", values)

    def __len__(self):
        return self.values.size


@dataclass(frozen=True)
class BatteryParams:
    capacity: float = 6.4
    max_charge: float = 3.3
    max_discharge: float = 3.3
    efficiency: float = 0.96

    def __post_init__(self):
        if self.capacity <= 0 or self.max_charge < 0 or self.max_discharge < 0:
            raise ValueError("battery capacity must be > 0 and power ratings >= 0")
        if not 0 < self.efficiency <= 1:
            raise ValueError("battery efficiency must lie in (0, 1]")


@dataclass
class BatteryState:
    soc: float
    charge_flag: bool = True
    s_plus: float = 0.0
    s_minus: float = 0.0

    def check(self, params: BatteryParams, tol: float = 1e-9) -> None:
        if self.s_plus * self.s_minus != 0:
            raise ValueError("simultaneous charging and discharging")
        if not -tol <= self.soc <= params.capacity + tol:
            raise ValueError(f"state of charge {self.soc} outside [0, {params.capacity}]")


@dataclass(frozen=True)
class QuantizationGrid:
    x_edges: np.ndarray
    y_edges: np.ndarray

    def __post_init__(self):
        for name in ("x_edges", "y_edges"):
            e = np.asarray(getattr(self, name), dtype=float)
            if e.ndim != 1 or e.size < 2 or not np.all(np.diff(e) > 0):
                raise ValueError(f"{name} must hold >= 2 strictly increasing values")
            object.__setattr__(self, name, e)

    @property
    def m(self) -> int:
        return self.x_edges.size - 1

    @property
    def n(self) -> int:
        return self.y_edges.size - 1

    @classmethod
    def uniform(cls, x_max: float, y_min: float, y_max: float, m: int = 15, n: int = 15):
        """Equal-width bins over ``[0, x_max]`` and ``[y_min, y_max]``."""
        return cls(np.linspace(0.0, x_max, m + 1), np.linspace(y_min, y_max, n + 1))


@dataclass(frozen=True)
class HouseholdConfig:
    battery: BatteryParams
    grid: QuantizationGrid
    day_ahead: np.ndarray  # kW, one value per schedule slot
    mu: float = 0.0
    y_min: float = 0.0
    y_max: float = math.inf
    reserve: float = 0.15
    schedule_dt: float = 1800.0

    def __post_init__(self):
        if self.mu < 0:
            raise ValueError("privacy price mu must be >= 0")
        if self.y_min > self.y_max:
            raise ValueError("y_min must not exceed y_max")
        if not (np.isclose(self.grid.y_edges[0], self.y_min) and np.isclose(self.grid.y_edges[-1], self.y_max)):
            raise ValueError("grid-load bin edges must span [y_min, y_max]")
        object.__setattr__(self, "day_ahead", np.asarray(self.day_ahead, dtype=float))

    def y_ref_at(self, t_seconds: float) -> float:
        k = min(int(t_seconds // self.schedule_dt), self.day_ahead.size - 1)
        return float(self.day_ahead[k])


@dataclass(frozen=True)
class TimingConfig:
    horizon: int = 14400
    control_dt: float = 1.0
    forecast_dt: float = 5.0
    target_dt: float = 5.0
    discard: int = 1800

    def __post_init__(self):
        for name in ("forecast_dt", "target_dt"):
            ratio = getattr(self, name) / self.control_dt
            if ratio < 1 or abs(ratio - round(ratio)) > 1e-9:
                raise ValueError(f"{name} must be an integer multiple of control_dt")
        if self.horizon < 1 or not 0 <= self.discard < self.horizon:
            raise ValueError("need horizon >= 1 and 0 <= discard < horizon")

    @property
    def ticks(self) -> int:
        return int(round(self.horizon / self.control_dt))

    @property
    def forecast_every(self) -> int:
        return int(round(self.forecast_dt / self.control_dt))

    @property
    def target_every(self) -> int:
        return int(round(self.target_dt / self.control_dt))

    @property
    def dt_hours(self) -> float:
        return self.control_dt / SECONDS_PER_HOUR


def quantize(value: float, edges) -> int:
    """0-based bin index of ``value`` under half-open bins ``[e[j], e[j+1])``.

    Values outside the edges are clamped to the outer bins.
    """
    if not math.isfinite(value):
        raise ValueError(f"cannot quantize non-finite value {value!r}")
    edges = np.asarray(edges, dtype=float)
    b = int(np.searchsorted(edges, value, side="right")) - 1
    return min(max(b, 0), edges.size - 2)


def battery_step(e: float, s_plus: float, s_minus: float, params: BatteryParams, dt: float) -> float:
    """Advance the state of charge by ``dt`` hours."""
    if s_plus < 0 or s_minus < 0:
        raise ValueError("charge and discharge powers must be non-negative")
    if s_plus > 0 and s_minus > 0:
        raise ValueError("simultaneous charging and discharging")
    eta = params.efficiency
    return e + dt * (eta * s_plus - s_minus / eta)


def grid_load(x: float, s_plus: float, s_minus: float) -> float:
    return x + s_plus - s_minus


def default_y_max(x_history, battery: BatteryParams) -> float:
    """Non-binding grid-load ceiling: historic peak consumer load plus charge rating."""
    return float(np.max(x_history)) + battery.max_charge
