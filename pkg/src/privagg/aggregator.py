"""Aggregator-side signals: measured aggregate, broadcast mismatch, target
profile and the substitute day-ahead schedules."""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

HALF_HOUR = 1800.0


@dataclass(frozen=True)
class BroadcastSignal:
    e: float
    t: int = 0


@dataclass(frozen=True)
class TargetProfile:
    values: np.ndarray  # kW on the target grid
    base: np.ndarray  # aggregate day-ahead schedule on the same grid
    gamma_bar: float
    target_dt: float

    def at_tick(self, t: int, control_dt: float = 1.0) -> float:
        return float(self.values[int(t * control_dt // self.target_dt)])


def measure_aggregate(loads) -> float:
    return float(np.sum(np.asarray(loads, dtype=float)))


def broadcast_signal(y_hat_prev: float, y_bar_now: float, t: int = 0) -> BroadcastSignal:
    return BroadcastSignal(float(y_hat_prev - y_bar_now), t)


def _expand(staircase, slot_s: float, step_s: float, count: int):
    idx = (np.arange(count) * step_s // slot_s).astype(int)
    return np.asarray(staircase, dtype=float)[np.minimum(idx, len(staircase) - 1)]


def generate_target(base, gamma_bar: float, target_dt: float, seed, horizon: float | None = None,
                    correlation_time: float = 120.0, window: float = HALF_HOUR, max_rounds: int = 200):
    """Target aggregate load: ``base`` plus a zero-mean reserve activation.

    ``base`` is the aggregate day-ahead staircase (one value per ``window``
    seconds).  The perturbation is a stationary Gaussian AR(1) sampled every
    ``target_dt`` seconds with standard deviation ``gamma_bar/3`` and
    correlation time ``correlation_time`` (0 gives independent samples).  It
    is then clipped to ``+-gamma_bar`` and re-centred per window, alternating
    until both hold, so every window is energy neutral.
    """
    base = np.asarray(base, dtype=float)
    horizon = base.size * window if horizon is None else horizon
    if abs(horizon / window - round(horizon / window)) > 1e-9 or horizon <= 0:
        raise ValueError(f"horizon {horizon} s is not a positive multiple of {window} s")
    if base.size * window < horizon - 1e-9:
        raise ValueError("base schedule does not cover the horizon")
    per_window = window / target_dt
    if abs(per_window - round(per_window)) > 1e-9:
        raise ValueError("target_dt must divide the schedule window")
    per_window = int(round(per_window))
    count = int(round(horizon / target_dt))
    base_t = _expand(base, window, target_dt, count)
    if gamma_bar <= 0:
        return TargetProfile(base_t.copy(), base_t, 0.0, target_dt)

    rng = np.random.default_rng(seed)
    sigma = gamma_bar / 3.0
    w = rng.standard_normal(count)
    if correlation_time > 0:
        phi = np.exp(-target_dt / correlation_time)
        delta = np.empty(count)
        delta[0] = sigma * w[0]
        innov = sigma * np.sqrt(1.0 - phi * phi)
        for k in range(1, count):
            delta[k] = phi * delta[k - 1] + innov * w[k]
    else:
        delta = sigma * w
    blocks = delta.reshape(-1, per_window)
    for _ in range(max_rounds):
        np.clip(blocks, -gamma_bar, gamma_bar, out=blocks)
        blocks -= blocks.mean(axis=1, keepdims=True)
        if np.max(np.abs(blocks)) <= gamma_bar:
            break
    return TargetProfile(base_t + blocks.ravel(), base_t, float(gamma_bar), target_dt)


def generate_day_ahead(history, dt: float = 1.0, window: float = HALF_HOUR, horizon: float | None = None):
    """Half-hourly staircase of mean historical load."""
    history = np.asarray(history, dtype=float)
    if history.size == 0:
        raise ValueError("empty load history")
    per = int(round(window / dt))
    if horizon is not None:
        need = int(round(horizon / dt))
        if history.size < need:
            raise ValueError(f"history covers {history.size * dt} s, horizon needs {horizon} s")
        history = history[:need]
    slots = int(np.ceil(history.size / per))
    out = np.empty(slots)
    for k in range(slots):
        out[k] = history[k * per:(k + 1) * per].mean()
    return out


def window_bias(profile: TargetProfile, window: float = HALF_HOUR) -> np.ndarray:
    """Per-window mean of ``values - base`` (kW)."""
    per = int(round(window / profile.target_dt))
    return (profile.values - profile.base).reshape(-1, per).mean(axis=1)


def write_series_csv(path, values) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["tick", "kW"])
        for k, v in enumerate(values):
            w.writerow([k, repr(float(v))])


def read_series_csv(path) -> np.ndarray:
    out = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["tick", "kW"]:
            raise ValueError(f"{path}: expected header 'tick,kW'")
        for lineno, row in enumerate(reader, start=2):
            try:
                tick, kw = int(row[0]), float(row[1])
            except (ValueError, IndexError) as exc:
                raise ValueError(f"{path}:{lineno}: cannot parse {row!r}") from exc
            if tick != len(out):
                raise ValueError(f"{path}:{lineno}: expected tick {len(out)}, got {tick}")
            out.append(kw)
    return np.asarray(out)
