"""Evaluation metrics: tracking errors, histogram MI estimators, time
aggregation and side-information-compensated grid loads."""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, fields

import numpy as np


def _pair(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.size < 1:
        raise ValueError("series must be non-empty and of equal length")
    return a, b


def nrmse(y_hat, y_bar) -> float:
    """Root-mean-square tracking error as a percentage of the mean target."""
    y_hat, y_bar = _pair(y_hat, y_bar)
    mean = y_bar.mean()
    if mean == 0:
        raise ValueError("NRMSE undefined for a zero-mean target")
    return float(100.0 * np.sqrt(np.mean((y_hat - y_bar) ** 2)) / mean)


def mape(y_hat, y_bar) -> float:
    y_hat, y_bar = _pair(y_hat, y_bar)
    if np.any(y_bar == 0):
        raise ValueError("MAPE undefined when the target has zeros")
    return float(100.0 * np.mean(np.abs((y_hat - y_bar) / y_bar)))


def nmae(y, y_ref, y_max: float) -> float:
    """Mean absolute schedule deviation as a percentage of ``y_max``."""
    y, y_ref = _pair(y, y_ref)
    if y_max <= 0:
        raise ValueError("NMAE needs a positive normaliser")
    return float(100.0 * np.mean(np.abs(y - y_ref)) / y_max)


def equal_width_bins(series, k: int) -> np.ndarray:
    """0-based indices of ``k`` equal-width bins over the observed range."""
    v = np.asarray(series, dtype=float)
    lo, hi = v.min(), v.max()
    if hi <= lo:
        return np.zeros(v.size, dtype=np.int64)
    idx = np.floor((v - lo) / (hi - lo) * k).astype(np.int64)
    return np.clip(idx, 0, k - 1)


def mi_from_labels(a, b) -> float:
    """Plug-in MI (bits) of two label sequences, with ``0 log 0 = 0``."""
    a = np.asarray(a)
    b = np.asarray(b)
    _, ia = np.unique(a, return_inverse=True)
    _, ib = np.unique(b, return_inverse=True)
    joint = np.zeros((ia.max() + 1, ib.max() + 1))
    np.add.at(joint, (ia, ib), 1.0)
    return mi_from_counts(joint)


def mi_from_counts(counts) -> float:
    c = np.asarray(counts, dtype=float)
    p = c / c.sum()
    px = p.sum(axis=1, keepdims=True)
    py = p.sum(axis=0, keepdims=True)
    nz = p > 0
    return float(max(np.sum(p[nz] * np.log2(p[nz] / (px * py)[nz])), 0.0))


def mi_iid(x, y, m: int = 15, n: int = 15) -> float:
    x, y = _pair(x, y)
    if x.size < 2:
        raise ValueError("need at least two samples")
    return mi_from_labels(equal_width_bins(x, m), equal_width_bins(y, n))


def mi_markov(x, y, m: int = 15, n: int = 15) -> float:
    """``I((X_t, X_t+1); (Y_t, Y_t+1)) - I(X_t; Y_t)``, floored at zero."""
    x, y = _pair(x, y)
    if x.size < 3:
        raise ValueError("need at least three samples")
    bx = equal_width_bins(x, m)
    by = equal_width_bins(y, n)
    pair_x = bx[:-1] * m + bx[1:]
    pair_y = by[:-1] * n + by[1:]
    return max(mi_from_labels(pair_x, pair_y) - mi_from_labels(bx, by), 0.0)


def aggregate_series(series, factor: int) -> np.ndarray:
    """Means over consecutive blocks of ``factor`` samples (remainder dropped)."""
    if factor < 1 or int(factor) != factor:
        raise ValueError("aggregation factor must be a positive integer")
    v = np.asarray(series, dtype=float)
    k = v.shape[-1] // factor
    return v[..., :k * factor].reshape(v.shape[:-1] + (k, factor)).mean(axis=-1)


def compensate_loads(y, y_hat, y_bar, y_ref):
    """Grid loads with the ancillary request (G), the schedule (D) or both (DG) removed.

    ``y`` and ``y_ref`` are ``(N, T)``; ``y_hat`` and ``y_bar`` are ``(T,)``.
    """
    y = np.atleast_2d(np.asarray(y, dtype=float))
    y_ref = np.atleast_2d(np.asarray(y_ref, dtype=float))
    request = np.asarray(y_hat, dtype=float) - np.asarray(y_bar, dtype=float)
    if y.shape != y_ref.shape or y.shape[1] != request.size:
        raise ValueError("series lengths differ")
    means = y.mean(axis=1)
    total = means.sum()
    if total == 0:
        raise ValueError("household mean loads sum to zero")
    y_g = y - request[None, :] * (means / total)[:, None]
    y_d = y - y_ref
    return y_g, y_d, y_g - y_ref


def scaled_bins(series, reference, n: int) -> int:
    """Bin count keeping the reference's bin width over a wider range."""
    span = np.ptp(series)
    ref = np.ptp(reference)
    if ref <= 0:
        return n
    return max(n, int(round(n * span / ref)))


@dataclass
class MetricsReport:
    resolution: float
    nrmse: float
    mape: float
    nmae: list = field(default_factory=list)
    i_iid: list = field(default_factory=list)
    i_mk: list = field(default_factory=list)
    i_iid_G: list = field(default_factory=list)
    i_mk_G: list = field(default_factory=list)
    i_iid_D: list = field(default_factory=list)
    i_mk_D: list = field(default_factory=list)
    i_iid_DG: list = field(default_factory=list)
    i_mk_DG: list = field(default_factory=list)

    PER_HOUSEHOLD = ("nmae", "i_iid", "i_mk", "i_iid_G", "i_mk_G", "i_iid_D", "i_mk_D", "i_iid_DG", "i_mk_DG")

    def average(self, name: str) -> float:
        return float(np.mean(getattr(self, name)))

    def flat(self) -> dict:
        out = {"resolution_s": self.resolution, "nrmse": self.nrmse, "mape": self.mape}
        for name in self.PER_HOUSEHOLD:
            vals = getattr(self, name)
            out[f"{name}_avg"] = float(np.mean(vals))
            for l, v in enumerate(vals):
                out[f"{name}_{l}"] = float(v)
        return out

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.flat(), fh, indent=2, sort_keys=False)
            fh.write("\n")

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["household", *self.PER_HOUSEHOLD])
            for l in range(len(self.nmae)):
                w.writerow([l, *(repr(float(getattr(self, k)[l])) for k in self.PER_HOUSEHOLD)])

    @classmethod
    def from_dict(cls, d):
        names = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in names})


def evaluate(x, y, y_ref, y_hat, y_bar, resolution: int = 1, m: int = 15, n: int = 15,
             dt: float = 1.0) -> MetricsReport:
    """Full metrics report for ``(N, T)`` household series at ``resolution`` samples."""
    x, y, y_ref = (np.atleast_2d(np.asarray(a, dtype=float)) for a in (x, y, y_ref))
    if resolution > 1:
        x, y, y_ref = (aggregate_series(a, resolution) for a in (x, y, y_ref))
        y_hat, y_bar = aggregate_series(y_hat, resolution), aggregate_series(y_bar, resolution)
    y_g, y_d, y_dg = compensate_loads(y, y_hat, y_bar, y_ref)
    rep = MetricsReport(resolution * dt, nrmse(y_hat, y_bar), mape(y_hat, y_bar))
    for l in range(y.shape[0]):
        ymax = float(np.max(y[l]))
        rep.nmae.append(nmae(y[l], y_ref[l], ymax) if ymax > 0 else 0.0)
        rep.i_iid.append(mi_iid(x[l], y[l], m, n))
        rep.i_mk.append(mi_markov(x[l], y[l], m, n))
        for tag, comp in (("G", y_g), ("D", y_d), ("DG", y_dg)):
            nn = scaled_bins(comp[l], y[l], n)
            getattr(rep, f"i_iid_{tag}").append(mi_iid(x[l], comp[l], m, nn))
            getattr(rep, f"i_mk_{tag}").append(mi_markov(x[l], comp[l], m, nn))
    return rep
