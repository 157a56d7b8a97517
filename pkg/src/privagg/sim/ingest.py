"""Metered trace ingestion: CSV parsing, 1 s resampling and household replication."""
from __future__ import annotations

import csv
import os
from datetime import datetime

import numpy as np

from ..core import LoadTrace

DAY = 86400


def _parse_time(text: str) -> float:
    try:
        return float(text)
    except ValueError:
        return datetime.fromisoformat(text.strip()).timestamp()


def read_trace_csv(path):
    """``(timestamps, power)`` from a CSV with columns ``timestamp, power``.

    A non-numeric first row is taken as a header.
    """
    times, power = [], []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                if len(row) < 2:
                    raise ValueError("expected two columns")
                t, p = _parse_time(row[0]), float(row[1])
            except ValueError as exc:
                if lineno == 1 and not times:
                    continue  # header
                raise ValueError(f"{path}:{lineno}: cannot parse {row!r} ({exc})") from None
            if not np.isfinite(p) or p < 0:
                raise ValueError(f"{path}:{lineno}: power must be finite and >= 0, got {p}")
            times.append(t)
            power.append(p)
    if not times:
        raise ValueError(f"{path}: no samples")
    return np.asarray(times), np.asarray(power)


def resample_hold(times, power, dt: float = 1.0):
    """Sample on a uniform grid holding the most recent reading.

    Returns ``(start, values)``.  The grid starts at the first timestamp and
    ends at the last; duplicate timestamps keep the last reading.
    """
    order = np.argsort(times, kind="stable")
    t = np.asarray(times, dtype=float)[order]
    p = np.asarray(power, dtype=float)[order]
    count = int(np.floor((t[-1] - t[0]) / dt + 1e-9)) + 1
    grid = t[0] + dt * np.arange(count)
    idx = np.searchsorted(t, grid + 1e-9 * dt, side="right") - 1
    return float(t[0]), p[idx]


def load_trace(path, household_id=None, dt: float = 1.0) -> LoadTrace:
    start, values = resample_hold(*read_trace_csv(path), dt=dt)
    hid = household_id if household_id is not None else os.path.splitext(os.path.basename(path))[0]
    return LoadTrace(hid, values, start, dt)


def list_trace_files(directory):
    files = sorted(os.path.join(directory, f) for f in os.listdir(directory) if f.lower().endswith(".csv"))
    if not files:
        raise ValueError(f"{directory}: no CSV traces")
    return files


def replicate(traces, N: int, seed) -> list:
    """``N`` traces: the originals, then day-shifted copies of them in turn.

    Copy ``k`` of file ``f`` is rotated by ``k`` days when the trace spans
    more than ``k`` days, otherwise by a seeded whole number of hours.
    """
    traces = list(traces)
    if not traces:
        raise ValueError("no source traces")
    rng = np.random.default_rng(seed)
    out = []
    for l in range(N):
        src = traces[l % len(traces)]
        copy = l // len(traces)
        if copy == 0:
            out.append(src)
            continue
        per_day = int(round(DAY / src.dt))
        L = len(src)
        shift = copy * per_day
        if shift >= L:
            shift = int(rng.integers(1, 24)) * (per_day // 24)
        shift %= L
        out.append(LoadTrace(f"{src.household_id}+{copy}", np.roll(src.values, -shift), src.start_time, src.dt))
    return out


def ingest_traces(paths, N: int | None = None, seed=0, dt: float = 1.0) -> list:
    """Load CSV traces (a directory or a list of files), resample and replicate to ``N``."""
    if isinstance(paths, (str, os.PathLike)):
        paths = list_trace_files(paths) if os.path.isdir(paths) else [paths]
    traces = [load_trace(p, dt=dt) for p in paths]
    return traces if N is None else replicate(traces, N, seed)


def write_trace_csv(path, trace: LoadTrace) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["timestamp", "power"])
        t = trace.start_time + trace.dt * np.arange(len(trace))
        for ti, v in zip(t, trace.values):
            w.writerow([repr(float(ti)), repr(float(v))])
