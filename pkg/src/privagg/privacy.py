"""Sliding-window histogram of (consumer bin, fractional grid-bin row) pairs and
the quadratic mutual-information proxy built on it.

The proxy is the second-order expansion of the plug-in MI of the smoothed
window PDF in the weights ``z`` that the next sample adds to row ``i*``::

    p_ij(z) = p_ij + z_j * [i == i*] / D

Restricted to the simplex (``sum(z) == 1``) the row-marginal term is constant,
which leaves ``I(z) = const + sum_j beta_j z_j + alpha_j z_j**2`` with

    beta_j  = (a[i*, j] - b[j]) / D
    alpha_j = (1/p[i*, j] - 1/py[j]) / (2 ln2 D**2)

``a = log2 p``, ``b = log2 py``, ``c = log2 px``.  ``alpha > 0`` whenever
``m > 1`` because ``py[j] - p[i*, j] >= (m - 1) * eps / D``.

Bin indices are 0-based throughout.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

LN2 = np.log(2.0)
ROW_SUM_TOL = 1e-9


class HistogramWindow:
    """Joint counts of the last ``capacity - 1`` completed samples.

    Rows are fractional: a sample in consumer bin ``i`` adds its weight vector
    ``z_row`` to ``counts[i]``.  ``capacity`` is ``K + 1``; the extra slot is
    the undecided current sample, which is why ``D = K + 1 + eps*m*n``.
    """

    def __init__(self, m: int, n: int, capacity: int = 901, eps: float = 0.1):
        if m < 1 or n < 1 or capacity < 1 or eps <= 0:
            raise ValueError("need m, n, capacity >= 1 and eps > 0")
        self.m, self.n, self.capacity, self.eps = m, n, capacity, eps
        k = capacity - 1
        self.counts = np.zeros((m, n))
        self._bins = np.zeros(k, dtype=np.int64)
        self._rows = np.zeros((k, n))
        self._head = 0  # next write position
        self._size = 0

    @property
    def K(self) -> int:
        return self.capacity - 1

    @property
    def D(self) -> float:
        return self.capacity + self.eps * self.m * self.n

    def __len__(self):
        return self._size

    def update(self, i_star: int, z_row) -> "HistogramWindow":
        z_row = np.asarray(z_row, dtype=float)
        if z_row.shape != (self.n,):
            raise ValueError(f"z_row must have length {self.n}")
        if abs(z_row.sum() - 1.0) > ROW_SUM_TOL or np.any(z_row < -ROW_SUM_TOL) or np.any(z_row > 1 + ROW_SUM_TOL):
            raise ValueError(f"z_row must be a probability vector, got sum {z_row.sum()!r}")
        if not 0 <= i_star < self.m:
            raise ValueError(f"consumer bin {i_star} outside 0..{self.m - 1}")
        if self.K == 0:
            return self
        if self._size == self.K:
            self.counts[self._bins[self._head]] -= self._rows[self._head]
        else:
            self._size += 1
        self._bins[self._head] = i_star
        self._rows[self._head] = z_row
        self.counts[i_star] += z_row
        self._head = (self._head + 1) % self.K
        return self

    def entries(self):
        """Stored ``(i_star, z_row)`` pairs, oldest first."""
        start = (self._head - self._size) % self.K if self.K else 0
        idx = [(start + k) % self.K for k in range(self._size)]
        return [(int(self._bins[i]), self._rows[i].copy()) for i in idx]

    def rebuild_counts(self) -> np.ndarray:
        c = np.zeros((self.m, self.n))
        for i, row in self.entries():
            c[i] += row
        return c

    def dump_csv(self, path, y_edges) -> None:
        """Write the count matrix with a header row of grid-load bin edges."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x_bin"] + [f"{e:.6g}" for e in y_edges])
            for i, row in enumerate(self.counts):
                w.writerow([i] + [repr(float(v)) for v in row])


def pdf_estimates(window: HistogramWindow):
    """Smoothed joint and marginal PDFs ``(p, px, py, D)``.

    Not renormalised while the window is filling, so ``p.sum() < 1`` then.
    """
    D = window.D
    p = (window.counts + window.eps) / D
    return p, p.sum(axis=1), p.sum(axis=0), D


def plugin_mi(p, px=None, py=None) -> float:
    """``sum p log2(p / (px py))`` with ``0 log 0 = 0``."""
    p = np.asarray(p, dtype=float)
    px = p.sum(axis=1) if px is None else px
    py = p.sum(axis=0) if py is None else py
    nz = p > 0
    ratio = p[nz] / np.outer(px, py)[nz]
    return float(np.sum(p[nz] * np.log2(ratio)))


@dataclass(frozen=True)
class MiProxyCoefficients:
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    const_term: float
    s_weight: float
    i_star: int


def mi_proxy_coefficients(p, py, px, i_star: int, D: float) -> MiProxyCoefficients:
    a = np.log2(p)
    b = np.log2(py)
    c = np.log2(px)
    s = 1.0 / D
    beta = s * (a[i_star] - b)
    alpha = s * s * (1.0 / p[i_star] - 1.0 / py) / (2.0 * LN2)
    # p[i*] == py exactly when m == 1; keep the proxy exactly flat there
    alpha = np.where(p[i_star] == py, 0.0, np.maximum(alpha, 0.0))
    const = float(np.sum(p * (a - c[:, None] - b[None, :])))
    return MiProxyCoefficients(a, b, c, alpha, beta, const, s, i_star)


def window_coefficients(window: HistogramWindow, i_star: int) -> MiProxyCoefficients:
    p, px, py, D = pdf_estimates(window)
    return mi_proxy_coefficients(p, py, px, i_star, D)


def mi_proxy_value(coeffs: MiProxyCoefficients, z_row) -> float:
    z = np.asarray(z_row, dtype=float)
    return coeffs.const_term + float(np.dot(coeffs.beta, z) + np.dot(coeffs.alpha, z * z))


def mi_proxy_gradient(coeffs: MiProxyCoefficients, z_row) -> np.ndarray:
    z = np.asarray(z_row, dtype=float)
    return coeffs.beta + 2.0 * coeffs.alpha * z


def gradient_bound(coeffs: MiProxyCoefficients, eps: float) -> np.ndarray:
    """Upper bound on ``|dI/dz_j|`` over ``z in [0, 1]^n``."""
    D = 1.0 / coeffs.s_weight
    return coeffs.s_weight * np.log2(D / eps) + 2.0 * coeffs.alpha
