"""Synthetic 1 Hz household consumption with appliance-level structure.

Used when no metered traces are supplied.  Each trace is the sum of a
standby level, a cycling refrigerator, evening lighting and randomly placed
appliance runs whose frequency follows a daily activity profile.
"""
from __future__ import annotations

import numpy as np

DAY = 86400

# (name, kW range, duration range in s, thermostat duty or 1)
APPLIANCES = (
    ("kettle", (1.8, 2.2), (90, 240), 1.0),
    ("microwave", (0.8, 1.2), (60, 420), 1.0),
    ("hob", (1.2, 2.0), (600, 1800), 0.6),
    ("oven", (1.8, 2.4), (1800, 3600), 0.5),
    ("washer", (1.8, 2.2), (600, 1200), 1.0),
    ("dishwasher", (1.6, 2.0), (900, 1500), 1.0),
    ("vacuum", (0.7, 1.1), (300, 900), 1.0),
    ("tv", (0.08, 0.2), (1800, 7200), 1.0),
)
# relative event rate per hour of day
ACTIVITY = np.array([0.1, 0.05, 0.05, 0.05, 0.05, 0.2, 0.8, 1.5, 1.2, 0.7, 0.6, 0.7,
                     1.0, 0.8, 0.6, 0.7, 1.0, 1.6, 2.0, 1.8, 1.4, 1.0, 0.6, 0.3])


def _add_run(out, start, length, power, duty, rng):
    end = min(start + length, out.size)
    if end <= start:
        return
    if duty >= 1.0:
        out[start:end] += power
        return
    period = int(rng.integers(60, 240))
    on = max(1, int(round(duty * period)))
    phase = (np.arange(end - start) % period) < on
    out[start:end] += power * phase


def synthetic_load(seed, duration: int, start_hour: float = 0.0, events_per_day: float = 14.0) -> np.ndarray:
    """Consumer load in kW at 1 s resolution for ``duration`` seconds."""
    rng = np.random.default_rng(seed)
    t0 = int(round(start_hour * 3600))
    tod = (t0 + np.arange(duration)) % DAY
    out = np.full(duration, rng.uniform(0.08, 0.25))

    period = int(rng.integers(1800, 3000))
    on = int(period * rng.uniform(0.3, 0.5))
    phase = int(rng.integers(period))
    fridge = ((np.arange(duration) + phase) % period) < on
    out += rng.uniform(0.08, 0.15) * fridge
    starts = np.flatnonzero(np.diff(fridge.astype(np.int8)) == 1) + 1
    for s in starts:
        out[s:s + 3] += 0.4

    hour = tod / 3600.0
    evening = (hour >= 18.0) | (hour < 0.5) | ((hour >= 6.5) & (hour < 8.0))
    lights = rng.uniform(0.05, 0.25)
    # lighting level changes every few minutes while occupied
    steps = np.repeat(rng.uniform(0.3, 1.0, duration // 180 + 1), 180)[:duration]
    out += lights * steps * evening

    rate = events_per_day / DAY * ACTIVITY / ACTIVITY.mean()
    lam = rate[(tod // 3600).astype(int)]
    n_events = rng.poisson(lam.sum())
    if n_events:
        cdf = np.cumsum(lam)
        when = np.searchsorted(cdf, rng.uniform(0, cdf[-1], n_events))
        kinds = rng.integers(len(APPLIANCES), size=n_events)
        for s, k in zip(np.sort(when), kinds):
            _, (p0, p1), (d0, d1), duty = APPLIANCES[k]
            _add_run(out, int(s), int(rng.integers(d0, d1 + 1)), rng.uniform(p0, p1), duty, rng)

    # meter noise at 1 W resolution
    out += rng.normal(0.0, 0.003, duration)
    return np.round(np.maximum(out, 0.0), 3)
