"""Compiled per-column kernels for the matrix-completion interior-point solver.

Both factors (``Lhat`` of the completed primal inverse and ``N`` of the
dual matrix) live on the same lower pattern, so every kernel takes one
``(indptr, indices)`` pair plus the two value arrays.
"""

import numpy as np
from numba import njit

from .dense import cholesky_kernel, jacobi_eigvals_kernel
from .sparse import llt_solve_kernel


@njit(cache=True, nogil=True)
def pair_solves(t0, t1, ccol, centptr, crow, cval, ip, ii, lv, nv, V1, V2):
    """Rows ``t - t0`` of ``V1``/``V2`` get ``Xhat e_c`` and ``inv(Y) A_j[:, c]``."""
    for t in range(t0, t1):
        r = t - t0
        c = ccol[t]
        v1 = V1[r]
        v1[:] = 0.0
        v1[c] = 1.0
        llt_solve_kernel(ip, ii, lv, v1)
        v2 = V2[r]
        v2[:] = 0.0
        for q in range(centptr[t], centptr[t + 1]):
            v2[crow[q]] = cval[q]
        llt_solve_kernel(ip, ii, nv, v2)


@njit(cache=True, nogil=True)
def _bilinear(v1, v2, rows, cols, vals, q0, q1):
    s = 0.0
    for q in range(q0, q1):
        a = rows[q]
        b = cols[q]
        if a == b:
            s += vals[q] * v1[a] * v2[a]
        else:
            s += vals[q] * (v1[a] * v2[b] + v1[b] * v2[a])
    return s


@njit(cache=True, nogil=True)
def pair_accumulate(j, t0, t1, ccol, V1, V2, tptr, trow, tcol, tval, gr, gc, gv, use_g, acc):
    """Add ``v1' A_i v2`` into ``acc[i - j]`` for ``i >= j``.

    Returns ``(sum_c v2[c], sum_c v1' G v2)``, i.e. the pieces
    ``A_j . inv(Y)`` and ``A_j . (Xhat G inv(Y))`` of the right-hand side.
    """
    m = tptr.size - 1
    ys = 0.0
    xg = 0.0
    for t in range(t0, t1):
        r = t - t0
        v1 = V1[r]
        v2 = V2[r]
        ys += v2[ccol[t]]
        for i in range(j, m):
            acc[i - j] += _bilinear(v1, v2, trow, tcol, tval, tptr[i], tptr[i + 1])
        if use_g:
            xg += _bilinear(v1, v2, gr, gc, gv, 0, gv.size)
    return ys, xg


@njit(cache=True, nogil=True)
def unit_solve(c, ip, ii, vals, y):
    y[:] = 0.0
    y[c] = 1.0
    llt_solve_kernel(ip, ii, vals, y)


@njit(cache=True, nogil=True)
def unit_plus_symv(c, y, rows, cols, vals, w):
    """``w = e_c + S y`` for the sparse symmetric ``S`` given by lower triplets."""
    w[:] = 0.0
    w[c] = 1.0
    for q in range(vals.size):
        a = rows[q]
        b = cols[q]
        w[a] += vals[q] * y[b]
        if a != b:
            w[b] += vals[q] * y[a]


@njit(cache=True, nogil=True)
def dx_store(c, bm, y, x, ip, ii, rowptr, rowcol, rowpos, low, up):
    """Keep column ``c`` of ``bm*y - x`` on the pattern.

    ``low[p]`` takes the entries on or below the diagonal of column ``c``;
    ``up[p]`` takes the mirrored entries whose storage sits in row ``c``.
    """
    for p in range(ip[c], ip[c + 1]):
        i = ii[p]
        low[p] = bm * y[i] - x[i]
    for t in range(rowptr[c], rowptr[c + 1]):
        i = rowcol[t]
        up[rowpos[t]] = bm * y[i] - x[i]


@njit(cache=True, nogil=True)
def _forward_cols(l, b):
    k = l.shape[0]
    for col in range(b.shape[1]):
        for j in range(k):
            b[j, col] /= l[j, j]
            for i in range(j + 1, k):
                b[i, col] -= l[i, j] * b[j, col]


@njit(cache=True, nogil=True)
def primal_step_kernel(ptr, posptr, pos, xv, dxv):
    """``min_r`` of the largest feasible step on each clique block.

    Returns ``(alpha, failing_clique, converged)``; ``failing_clique`` is -1
    unless a clique block of ``X`` is not positive definite.
    """
    alpha = 1.0
    for r in range(ptr.size - 1):
        k = ptr[r + 1] - ptr[r]
        base = posptr[r]
        a = np.empty((k, k))
        d = np.empty((k, k))
        for i in range(k):
            for j in range(k):
                p = pos[base + i * k + j]
                a[i, j] = xv[p]
                d[i, j] = dxv[p]
        if cholesky_kernel(a) >= 0:
            return -1.0, r, True
        _forward_cols(a, d)
        t = d.T.copy()
        _forward_cols(a, t)
        ev, ok = jacobi_eigvals_kernel(t, 50 * k)
        if not ok:
            return -1.0, r, False
        lam = ev[0]
        if lam < 0.0:
            step = -1.0 / lam
            if step < alpha:
                alpha = step
    return alpha, -1, True
