"""Dual active-set solver for the household QP.

Variables are ``v = (s, z_1, ..., z_n)``.  The objective is separable,
``0.5 * sum(h * v**2) + g @ v`` with ``h > 0``, and the feasible set is::

    sum(z) = 1                                  (row 0, equality)
    s >= s_lo,  -s >= -s_hi                     (rows 1, 2)
    z_j >= 0                                    (rows 3 .. n+2)
    d*s - lo @ z >= -xhat                       (row n+3: y above lower edges)
    -d*s + hi @ z >= xhat + delta               (row n+4: y below upper edges)

where ``y = xhat + d*s`` and ``lo``/``hi`` are the lower and upper y-bin edges.
The method starts from the unconstrained minimum and adds violated
constraints one at a time (Goldfarb & Idnani, 1983), so no feasible starting
point is needed and infeasibility is detected when a violated constraint
cannot be added.  Dimensions here are tiny, so the projected inverse Hessian
is rebuilt densely from the active normals at every step.
"""
import numpy as np

from .._jit import njit

OK = 0
INFEASIBLE = 1
MAX_ITER = 2


@njit(cache=True)
def constraint_matrix(d, xhat, s_lo, s_hi, lo, hi, delta):
    """Rows ``A`` and right-hand sides ``b`` of ``A @ v >= b`` (row 0 is an equality)."""
    n = lo.size
    nv = n + 1
    nc = n + 5
    A = np.zeros((nc, nv))
    b = np.zeros(nc)
    for j in range(n):
        A[0, 1 + j] = 1.0
    b[0] = 1.0
    A[1, 0] = 1.0
    b[1] = s_lo
    A[2, 0] = -1.0
    b[2] = -s_hi
    for j in range(n):
        A[3 + j, 1 + j] = 1.0
    A[n + 3, 0] = d
    A[n + 4, 0] = -d
    for j in range(n):
        A[n + 3, 1 + j] = -lo[j]
        A[n + 4, 1 + j] = hi[j]
    b[n + 3] = -xhat
    b[n + 4] = xhat + delta
    return A, b


@njit(cache=True)
def _small_solve(M, rhs, k, out):
    """Gaussian elimination with partial pivoting on the leading ``k x k`` block."""
    for c in range(k):
        piv = c
        best = abs(M[c, c])
        for rr in range(c + 1, k):
            if abs(M[rr, c]) > best:
                best = abs(M[rr, c])
                piv = rr
        if piv != c:
            for cc in range(k):
                tmp = M[c, cc]
                M[c, cc] = M[piv, cc]
                M[piv, cc] = tmp
            tmp = rhs[c]
            rhs[c] = rhs[piv]
            rhs[piv] = tmp
        for rr in range(c + 1, k):
            f = M[rr, c] / M[c, c]
            for cc in range(c, k):
                M[rr, cc] -= f * M[c, cc]
            rhs[rr] -= f * rhs[c]
    for c in range(k - 1, -1, -1):
        acc = rhs[c]
        for cc in range(c + 1, k):
            acc -= M[c, cc] * out[cc]
        out[c] = acc / M[c, c]


@njit(cache=True)
def _directions(A, active, q, bvar, bsign, hinv, p, z, r, fixed, gpos, M, rhs, rg):
    """Primal step ``z = H n_p`` and dual step ``r = N* n_p`` for the active set.

    Active rows with a single unit entry (``bvar >= 0``) fix their variable,
    so the dense solve only involves the general rows.
    """
    nv = hinv.size
    for k in range(nv):
        fixed[k] = False
    ng = 0
    for a in range(q):
        row = active[a]
        if bvar[row] >= 0:
            fixed[bvar[row]] = True
        else:
            gpos[ng] = a
            ng += 1
    for i in range(ng):
        ri = active[gpos[i]]
        acc = 0.0
        for k in range(nv):
            if not fixed[k]:
                acc += A[ri, k] * hinv[k] * A[p, k]
        rhs[i] = acc
        for j in range(i, ng):
            rj = active[gpos[j]]
            acc = 0.0
            for k in range(nv):
                if not fixed[k]:
                    acc += A[ri, k] * hinv[k] * A[rj, k]
            M[i, j] = acc
            M[j, i] = acc
    if ng > 0:
        _small_solve(M, rhs, ng, rg)
    for k in range(nv):
        if fixed[k]:
            z[k] = 0.0
        else:
            acc = A[p, k]
            for i in range(ng):
                acc -= rg[i] * A[active[gpos[i]], k]
            z[k] = hinv[k] * acc
    for i in range(ng):
        r[gpos[i]] = rg[i]
    for a in range(q):
        row = active[a]
        k = bvar[row]
        if k >= 0:
            acc = A[p, k]
            for i in range(ng):
                acc -= rg[i] * A[active[gpos[i]], k]
            r[a] = bsign[row] * acc


@njit(cache=True)
def _bound_rows(A):
    """Variable index and sign for rows that are a signed unit vector, else -1."""
    nc, nv = A.shape
    bvar = np.full(nc, -1, dtype=np.int64)
    bsign = np.zeros(nc)
    for row in range(nc):
        hit = -1
        count = 0
        for k in range(nv):
            if A[row, k] != 0.0:
                count += 1
                hit = k
        if count == 1 and abs(A[row, hit]) == 1.0:
            bvar[row] = hit
            bsign[row] = A[row, hit]
    return bvar, bsign


@njit(cache=True)
def solve_qp(h, g, A, b, n_eq, v, lam, tol, max_iter):
    """Minimise ``0.5*sum(h*v**2) + g@v`` s.t. ``A[:n_eq]@v == b[:n_eq]``, ``A[n_eq:]@v >= b[n_eq:]``.

    Writes the minimiser into ``v`` and the constraint multipliers into
    ``lam`` (zero for inactive rows).  Returns a status code.
    """
    nv = h.size
    nc = b.size
    hinv = 1.0 / h
    for k in range(nv):
        v[k] = -g[k] * hinv[k]
    bvar, bsign = _bound_rows(A)
    for row in range(n_eq):
        bvar[row] = -1
    active = np.empty(nc, dtype=np.int64)
    is_active = np.zeros(nc, dtype=np.bool_)
    u = np.zeros(nc + 1)
    z = np.empty(nv)
    r = np.zeros(nc + 1)
    fixed = np.zeros(nv, dtype=np.bool_)
    gpos = np.empty(nc, dtype=np.int64)
    M = np.empty((nc, nc))
    rhs = np.empty(nc)
    rg = np.empty(nc)
    q = 0
    for k in range(nc):
        lam[k] = 0.0

    for p in range(n_eq):
        _directions(A, active, q, bvar, bsign, hinv, p, z, r, fixed, gpos, M, rhs, rg)
        zn = 0.0
        sp = -b[p]
        for k in range(nv):
            zn += z[k] * A[p, k]
            sp += A[p, k] * v[k]
        if zn <= 1e-14:
            if abs(sp) > tol:
                return INFEASIBLE
            continue
        t = -sp / zn
        for k in range(nv):
            v[k] += t * z[k]
        for a in range(q):
            u[a] -= t * r[a]
        u[q] = t
        active[q] = p
        is_active[p] = True
        q += 1

    it = 0
    while True:
        p = -1
        smin = -tol
        for k in range(n_eq, nc):
            if is_active[k]:
                continue
            sk = -b[k]
            for c in range(nv):
                sk += A[k, c] * v[c]
            if sk < smin:
                smin = sk
                p = k
        if p < 0:
            break
        u[q] = 0.0
        pn = 0.0
        for k in range(nv):
            pn += hinv[k] * A[p, k] * A[p, k]
        while True:
            it += 1
            if it > max_iter:
                return MAX_ITER
            _directions(A, active, q, bvar, bsign, hinv, p, z, r, fixed, gpos, M, rhs, rg)
            zn = 0.0
            sp = -b[p]
            for k in range(nv):
                zn += z[k] * A[p, k]
                sp += A[p, k] * v[k]
            if sp >= 0.0:
                # satisfied through earlier partial steps
                break
            full = zn > 1e-13 * pn
            t1 = np.inf
            kdrop = -1
            for a in range(q):
                if active[a] >= n_eq and r[a] > 1e-13:
                    ta = u[a] / r[a]
                    if ta < t1:
                        t1 = ta
                        kdrop = a
            if not full and kdrop < 0:
                return INFEASIBLE
            t2 = -sp / zn if full else np.inf
            if full and t2 <= t1:
                for k in range(nv):
                    v[k] += t2 * z[k]
                for a in range(q):
                    u[a] -= t2 * r[a]
                u[q] += t2
                active[q] = p
                is_active[p] = True
                q += 1
                break
            t = t1
            if full:
                for k in range(nv):
                    v[k] += t * z[k]
            for a in range(q):
                u[a] -= t * r[a]
            u[q] += t
            is_active[active[kdrop]] = False
            for a in range(kdrop, q):
                active[a] = active[a + 1]
                u[a] = u[a + 1]
            q -= 1

    for a in range(q):
        lam[active[a]] = u[a]
    return OK


@njit(cache=True)
def solve_household(h, g, d, xhat, s_lo, s_hi, lo, hi, delta, v, lam):
    """Household QP over the box/simplex/link polytope; see module docstring."""
    A, b = constraint_matrix(d, xhat, s_lo, s_hi, lo, hi, delta)
    status = solve_qp(h, g, A, b, 1, v, lam, 1e-12, 40 * b.size)
    # snap rounding residue onto the s box so a zero-width box yields exactly 0
    v[0] = min(max(v[0], s_lo), s_hi)
    return status


@njit(cache=True)
def solve_fleet(h, g, d, xhat, s_lo, s_hi, lo, hi, delta, v, lam, status):
    """Row-wise :func:`solve_household` over ``N`` households."""
    for l in range(h.shape[0]):
        status[l] = solve_household(h[l], g[l], d[l], xhat[l], s_lo[l], s_hi[l], lo[l], hi[l], delta[l], v[l], lam[l])
