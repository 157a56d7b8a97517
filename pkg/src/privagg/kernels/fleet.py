"""Household-batched kernels used by the simulation tick loop.

Each operation has a jitted loop form and a vectorised numpy form; ``FLEET``
picks the jitted one when numba is enabled.  Arrays are indexed
``[household, ...]``; bin indices are 0-based.
"""
import numpy as np

from .._jit import JIT_ENABLED, njit
from . import qp

LN2 = np.log(2.0)


@njit(cache=True)
def quantize_rows_loop(values, edges):
    N = values.size
    B = edges.shape[1] - 1
    out = np.empty(N, dtype=np.int64)
    for l in range(N):
        k = 0
        for j in range(1, B):
            if edges[l, j] <= values[l]:
                k = j
            else:
                break
        out[l] = k
    return out


def quantize_rows_numpy(values, edges):
    return (edges[:, 1:-1] <= values[:, None]).sum(axis=1).astype(np.int64)


@njit(cache=True)
def proxy_rows_loop(counts, istar, eps, D):
    """Per-household ``(alpha, beta, const)`` of the MI proxy at row ``istar``."""
    N, m, n = counts.shape
    alpha = np.empty((N, n))
    beta = np.empty((N, n))
    const = np.empty(N)
    col = np.empty(n)
    for l in range(N):
        for j in range(n):
            acc = m * eps
            for i in range(m):
                acc += counts[l, i, j]
            col[j] = acc
        i0 = istar[l]
        for j in range(n):
            pj = counts[l, i0, j] + eps
            beta[l, j] = (np.log2(pj) - np.log2(col[j])) / D
            if m == 1:
                alpha[l, j] = 0.0
            else:
                alpha[l, j] = max((1.0 / pj - 1.0 / col[j]) / (2.0 * LN2 * D), 0.0)
        total = 0.0
        for i in range(m):
            row = n * eps
            for j in range(n):
                row += counts[l, i, j]
            for j in range(n):
                c = counts[l, i, j] + eps
                total += c * np.log2(c * D / (row * col[j]))
        const[l] = total / D
    return alpha, beta, const


def proxy_rows_numpy(counts, istar, eps, D):
    N, m, n = counts.shape
    c = counts + eps
    col = c.sum(axis=1)
    row = c.sum(axis=2)
    pr = c[np.arange(N), istar]
    beta = (np.log2(pr) - np.log2(col)) / D
    if m == 1:
        alpha = np.zeros_like(beta)
    else:
        alpha = np.maximum((1.0 / pr - 1.0 / col) / (2.0 * LN2 * D), 0.0)
    const = np.sum(c * np.log2(c * D / (row[:, :, None] * col[:, None, :])), axis=(1, 2)) / D
    return alpha, beta, const


@njit(cache=True)
def window_push_loop(counts, bins, rows, head, size, istar, z):
    N, K = bins.shape
    if K == 0:
        return
    n = z.shape[1]
    for l in range(N):
        h = head[l]
        if size[l] == K:
            old = bins[l, h]
            for j in range(n):
                counts[l, old, j] -= rows[l, h, j]
        else:
            size[l] += 1
        bins[l, h] = istar[l]
        for j in range(n):
            rows[l, h, j] = z[l, j]
            counts[l, istar[l], j] += z[l, j]
        head[l] = (h + 1) % K


def window_push_numpy(counts, bins, rows, head, size, istar, z):
    N, K = bins.shape
    if K == 0:
        return
    ar = np.arange(N)
    full = size == K
    old = bins[ar, head]
    counts[ar[full], old[full]] -= rows[ar[full], head[full]]
    size[~full] += 1
    bins[ar, head] = istar
    rows[ar, head] = z
    counts[ar, istar] += z
    head[:] = (head + 1) % K


def solve_fleet_python(h, g, d, xhat, s_lo, s_hi, lo, hi, delta, v, lam, status):
    solve = getattr(qp.solve_household, "py_func", qp.solve_household)
    for l in range(h.shape[0]):
        status[l] = solve(h[l], g[l], d[l], xhat[l], s_lo[l], s_hi[l], lo[l], hi[l], delta[l], v[l], lam[l])


class _Kernels:
    def __init__(self, jit: bool):
        self.jit = jit
        if jit:
            self.quantize_rows = quantize_rows_loop
            self.proxy_rows = proxy_rows_loop
            self.window_push = window_push_loop
            self.solve_fleet = qp.solve_fleet
        else:
            self.quantize_rows = quantize_rows_numpy
            self.proxy_rows = proxy_rows_numpy
            self.window_push = window_push_numpy
            self.solve_fleet = solve_fleet_python


FLEET = _Kernels(JIT_ENABLED)
NUMPY = _Kernels(False)
