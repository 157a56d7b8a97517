"""Result files: per-tick traces, metrics and optional SVG charts.

``traces.csv`` has one row per tick.  Columns are ``tick, y_hat, y_bar,
e_signal`` followed by, for every household ``l``, the block
``x_l, xhat_l, y_l, yref_l, splus_l, sminus_l, soc_l, istar_l, mi_l``.
"""
from __future__ import annotations

import os

import numpy as np

from ..metrics import MetricsReport

AGGREGATE_COLUMNS = ("y_hat", "y_bar", "e_signal")
HOUSEHOLD_COLUMNS = ("x", "xhat", "y", "yref", "splus", "sminus", "soc", "istar", "mi")
_FIELDS = {"x": "x", "xhat": "xhat", "y": "y", "yref": "y_ref", "splus": "s_plus", "sminus": "s_minus",
           "soc": "soc", "istar": "istar", "mi": "mi"}


def trace_header(N: int) -> list:
    cols = ["tick", *AGGREGATE_COLUMNS]
    for l in range(N):
        cols.extend(f"{c}_{l}" for c in HOUSEHOLD_COLUMNS)
    return cols


def write_traces(path, results) -> None:
    N, T = results.x.shape
    block = np.empty((T, 4 + N * len(HOUSEHOLD_COLUMNS)))
    block[:, 0] = np.arange(T)
    block[:, 1] = results.y_hat
    block[:, 2] = results.y_bar
    block[:, 3] = results.e_signal
    for k, c in enumerate(HOUSEHOLD_COLUMNS):
        block[:, 4 + k::len(HOUSEHOLD_COLUMNS)] = getattr(results, _FIELDS[c]).T
    fmt = ["%d", *(["%.17g"] * 3)] + (["%.17g"] * 7 + ["%d", "%.17g"]) * N
    np.savetxt(path, block, fmt=fmt, delimiter=",", header=",".join(trace_header(N)), comments="")


def read_traces(path) -> dict:
    """Columns of a traces file as arrays: aggregates ``(T,)``, household fields ``(N, T)``."""
    with open(path) as fh:
        header = fh.readline().strip().split(",")
    if header[:4] != ["tick", *AGGREGATE_COLUMNS] or (len(header) - 4) % len(HOUSEHOLD_COLUMNS):
        raise ValueError(f"{path}: not a traces file")
    N = (len(header) - 4) // len(HOUSEHOLD_COLUMNS)
    if header != trace_header(N):
        raise ValueError(f"{path}: unexpected column layout")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    out = {"tick": data[:, 0].astype(np.int64)}
    for k, c in enumerate(AGGREGATE_COLUMNS):
        out[c] = data[:, 1 + k]
    for k, c in enumerate(HOUSEHOLD_COLUMNS):
        out[c] = data[:, 4 + k::len(HOUSEHOLD_COLUMNS)].T.copy()
    out["istar"] = out["istar"].astype(np.int64)
    return out


def svg_lines(path, series: dict, title: str = "", width: int = 900, height: int = 320) -> None:
    """Line chart of equally long series (name -> values) as a standalone SVG."""
    colours = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd")
    vals = [np.asarray(v, dtype=float) for v in series.values()]
    lo = min(float(v.min()) for v in vals)
    hi = max(float(v.max()) for v in vals)
    hi = hi if hi > lo else lo + 1.0
    pad = 40
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
             f'<rect width="{width}" height="{height}" fill="white"/>',
             f'<text x="{pad}" y="20" font-size="14">{title}</text>',
             f'<text x="4" y="{pad}" font-size="10">{hi:.2f}</text>',
             f'<text x="4" y="{height - pad}" font-size="10">{lo:.2f}</text>']
    for k, (name, v) in enumerate(zip(series, vals)):
        # thin long series to at most two points per pixel
        step = max(1, v.size // (2 * width))
        idx = np.arange(0, v.size, step)
        px = pad + (width - 2 * pad) * idx / max(v.size - 1, 1)
        py = height - pad - (height - 2 * pad) * (v[idx] - lo) / (hi - lo)
        pts = " ".join(f"{a:.1f},{b:.1f}" for a, b in zip(px, py))
        c = colours[k % len(colours)]
        parts.append(f'<polyline fill="none" stroke="{c}" stroke-width="1" points="{pts}"/>')
        parts.append(f'<text x="{width - 160}" y="{20 + 14 * k}" font-size="12" fill="{c}">{name}</text>')
    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts) + "\n")


def emit_results(results, outdir, svg: bool = False) -> list:
    """Write traces and metrics of ``results`` into ``outdir``; returns the paths written."""
    os.makedirs(outdir, exist_ok=True)
    written = []
    path = os.path.join(outdir, "traces.csv")
    write_traces(path, results)
    written.append(path)
    if results.metrics:
        base = min(results.metrics)
        for res, report in sorted(results.metrics.items()):
            stem = "metrics" if res == base else f"metrics_{int(res)}s"
            for ext, writer in (("json", MetricsReport.to_json), ("csv", MetricsReport.to_csv)):
                p = os.path.join(outdir, f"{stem}.{ext}")
                writer(report, p)
                written.append(p)
    if svg:
        p = os.path.join(outdir, "tracking.svg")
        svg_lines(p, {"target": results.y_bar, "aggregate": results.y_hat}, f"Aggregate tracking ({results.mode})")
        written.append(p)
    return written
