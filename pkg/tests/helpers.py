"""Random instance generators shared by the tests."""
from __future__ import annotations

import numpy as np

from privagg.core import BatteryParams, HouseholdConfig, QuantizationGrid
from privagg.projection import ProjectionProblem, default_delta


def random_household(rng, n=None, m=None, mu=None):
    n = n or int(rng.integers(2, 16))
    m = m or int(rng.integers(2, 16))
    battery = BatteryParams(capacity=float(rng.uniform(1, 10)), max_charge=float(rng.uniform(0.5, 4)),
                            max_discharge=float(rng.uniform(0.5, 4)), efficiency=float(rng.uniform(0.8, 1)))
    x_max = float(rng.uniform(1, 6))
    y_max = x_max + battery.max_charge
    grid = QuantizationGrid.uniform(x_max, 0.0, y_max, m, n)
    mu = float(rng.uniform(0, 9)) if mu is None else mu
    return HouseholdConfig(battery, grid, rng.uniform(0.2, x_max, 8), mu, 0.0, y_max)


def random_projection(rng, n=None, flag="random"):
    hh = random_household(rng, n=n)
    b = hh.battery
    if flag == "random":
        flag = bool(rng.integers(2)) if rng.uniform() < 0.85 else None
    xhat = float(rng.uniform(0, hh.grid.x_edges[-1]))
    e = float(rng.uniform(0, b.capacity))
    if rng.uniform() < 0.15:
        e = b.capacity if rng.uniform() < 0.5 else 0.0
    nn = hh.grid.n
    z = rng.normal(1.0 / nn, 0.4, nn) if rng.uniform() < 0.7 else rng.uniform(-1, 2, nn)
    s = float(rng.normal(0, 2))
    dt = 1 / 3600 if rng.uniform() < 0.7 else float(rng.uniform(0.05, 1.0))
    return ProjectionProblem(s, z, flag, xhat, e, b, hh.grid, hh.y_min, hh.y_max, dt, default_delta(hh.grid))
