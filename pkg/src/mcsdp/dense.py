"""Dense symmetric linear algebra at clique scale.

Matrices are plain ``numpy`` arrays. Symmetric inputs are read from the
lower triangle only; factors come back as lower-triangular arrays with an
explicitly zeroed upper part. The ``*_kernel`` functions are numba-compiled
and callable from other compiled code (the completion and step-length
kernels build on them).
"""

import numpy as np
from numba import njit

from .errors import NoConvergence, NotPositiveDefinite, ZeroDiagonal

PIVOT_RTOL = 1e-13

_MODES = ("forward", "backward", "forward_transpose", "backward_transpose")


@njit(cache=True, nogil=True)
def cholesky_kernel(a):
    """Factor the lower triangle of ``a`` in place.

    Returns -1 on success, otherwise the index of the failing pivot. The
    strict upper triangle is zeroed on success.
    """
    n = a.shape[0]
    dmax = 0.0
    for i in range(n):
        if a[i, i] > dmax:
            dmax = a[i, i]
    tol = PIVOT_RTOL * dmax
    for j in range(n):
        d = a[j, j]
        for k in range(j):
            d -= a[j, k] * a[j, k]
        if not d > tol:
            return j
        d = np.sqrt(d)
        a[j, j] = d
        for i in range(j + 1, n):
            s = a[i, j]
            for k in range(j):
                s -= a[i, k] * a[j, k]
            a[i, j] = s / d
    for i in range(n):
        for j in range(i + 1, n):
            a[i, j] = 0.0
    return -1


@njit(cache=True, nogil=True)
def lower_inverse_kernel(m, out):
    """Write the inverse of lower-triangular ``m`` into ``out``.

    Returns -1 on success or the index of a zero diagonal entry.
    """
    n = m.shape[0]
    for i in range(n):
        if m[i, i] == 0.0:
            return i
    out[:, :] = 0.0
    for j in range(n):
        out[j, j] = 1.0 / m[j, j]
        for i in range(j + 1, n):
            s = 0.0
            for k in range(j, i):
                s -= m[i, k] * out[k, j]
            out[i, j] = s / m[i, i]
    return -1


@njit(cache=True, nogil=True)
def jacobi_eigvals_kernel(a, max_sweeps):
    """Cyclic Jacobi on a symmetric copy of ``a``.

    Returns ``(eigenvalues ascending, converged)``.
    """
    n = a.shape[0]
    w = np.empty((n, n))
    for i in range(n):
        for j in range(i + 1):
            w[i, j] = a[i, j]
            w[j, i] = a[i, j]
    scale = 0.0
    for i in range(n):
        for j in range(n):
            scale += w[i, j] * w[i, j]
    converged = n <= 1 or scale == 0.0
    for sweep in range(max_sweeps):
        if converged:
            break
        off = 0.0
        for i in range(n):
            for j in range(i + 1, n):
                off += w[i, j] * w[i, j]
        if off <= 1e-30 * scale:
            converged = True
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = w[p, q]
                if apq == 0.0:
                    continue
                theta = (w[q, q] - w[p, p]) / (2.0 * apq)
                if theta >= 0.0:
                    t = 1.0 / (theta + np.sqrt(1.0 + theta * theta))
                else:
                    t = -1.0 / (-theta + np.sqrt(1.0 + theta * theta))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                for k in range(n):
                    wkp = w[k, p]
                    wkq = w[k, q]
                    w[k, p] = c * wkp - s * wkq
                    w[k, q] = s * wkp + c * wkq
                for k in range(n):
                    wpk = w[p, k]
                    wqk = w[q, k]
                    w[p, k] = c * wpk - s * wqk
                    w[q, k] = s * wpk + c * wqk
                w[p, q] = 0.0
                w[q, p] = 0.0
    ev = np.empty(n)
    for i in range(n):
        ev[i] = w[i, i]
    ev.sort()
    return ev, converged


@njit(cache=True, nogil=True)
def _solve_lower(l, b, transpose):
    n = b.shape[0]
    x = b.copy()
    if not transpose:
        for j in range(n):
            x[j] /= l[j, j]
            for i in range(j + 1, n):
                x[i] -= l[i, j] * x[j]
    else:
        for j in range(n - 1, -1, -1):
            s = x[j]
            for i in range(j + 1, n):
                s -= l[i, j] * x[i]
            x[j] = s / l[j, j]
    return x


def _as_square(a, name="matrix"):
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
        raise ValueError(f"{name} must be a non-empty square array, got shape {a.shape}")
    return a


def symmetrize_lower(a):
    """Return the symmetric matrix described by the lower triangle of ``a``."""
    a = _as_square(a)
    low = np.tril(a)
    return low + np.tril(a, -1).T


def dense_cholesky(a):
    """Cholesky factor ``M`` with ``M @ M.T == a``.

    Raises :class:`NotPositiveDefinite` with the 0-based pivot index when a
    pivot is at or below ``1e-13 * max(diag(a))``.
    """
    work = np.array(_as_square(a), dtype=np.float64, order="C", copy=True)
    status = cholesky_kernel(work)
    if status >= 0:
        raise NotPositiveDefinite(status)
    return work


def triangular_solve(l, b, mode="forward"):
    """Solve a system with the lower-triangular ``l``.

    ``forward`` solves ``L x = b`` and ``backward`` solves ``L.T x = b``.
    The ``*_transpose`` modes act on the reversal-conjugated factor
    ``P L.T P`` (lower) and ``P L P`` (upper), the shapes produced when a
    Cholesky factor is computed in reversed row/column order.
    """
    l = _as_square(l, "factor")
    b = np.asarray(b, dtype=np.float64)
    if b.shape != (l.shape[0],):
        raise ValueError("right-hand side length does not match factor dimension")
    if mode not in _MODES:
        raise ValueError(f"unknown mode {mode!r}")
    diag = np.diag(l)
    zero = np.flatnonzero(diag == 0.0)
    if zero.size:
        raise ZeroDiagonal(int(zero[0]))
    l = np.ascontiguousarray(l)
    if mode == "forward":
        return _solve_lower(l, b, False)
    if mode == "backward":
        return _solve_lower(l, b, True)
    # P L.T P x = b  <=>  L.T (P x) = P b
    if mode == "forward_transpose":
        return _solve_lower(l, b[::-1].copy(), True)[::-1].copy()
    return _solve_lower(l, b[::-1].copy(), False)[::-1].copy()


def reversal_permutation(k):
    """0-based index vector reversing the order of ``k`` items."""
    if k < 1:
        raise ValueError("k must be positive")
    return np.arange(k - 1, -1, -1, dtype=np.int64)


def sym_eigenvalues(a):
    """All eigenvalues of the symmetric matrix ``a``, ascending."""
    a = np.ascontiguousarray(_as_square(a))
    n = a.shape[0]
    ev, ok = jacobi_eigvals_kernel(a, 50 * n)
    if not ok:
        raise NoConvergence(f"Jacobi sweeps did not converge within {50 * n} sweeps")
    return ev


def inverse_lower_triangular(m):
    m = np.ascontiguousarray(_as_square(m))
    out = np.empty_like(m)
    status = lower_inverse_kernel(m, out)
    if status >= 0:
        raise ZeroDiagonal(status)
    return out
