"""Positive matrix completion over a chordal pattern.

The solver only ever needs the max-determinant completion ``Xhat`` of a
partial matrix through products ``Xhat @ v``. ``inverse_factor`` computes a
lower-triangular ``Lhat`` on the extended pattern with
``inv(Xhat) = Lhat @ Lhat.T`` one clique at a time, so ``Xhat @ v`` costs two
sparse triangular solves. ``legacy_factorize``/``legacy_apply`` implement the
older ``L' D L`` product form and are kept as an independent check.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg
from numba import njit

from .dense import cholesky_kernel, lower_inverse_kernel
from .errors import NotPositiveDefinite
from .sparse import SparseLowerFactor, SymPattern, llt_solve_kernel


@dataclass(eq=False)
class PartialMatrix:
    """Symmetric matrix known only on ``structure.pattern`` (lower storage)."""

    structure: object
    values: np.ndarray

    @classmethod
    def from_dense(cls, structure, x):
        E = structure.pattern
        return cls(structure, np.asarray(x, dtype=np.float64)[E.indices, E.cols].copy())

    @classmethod
    def scaled_identity(cls, structure, lam):
        E = structure.pattern
        return cls(structure, np.where(E.indices == E.cols, float(lam), 0.0))

    def block(self, r, rows=None, cols=None):
        c = self.structure.cliques[r]
        rows = c.members if rows is None else rows
        cols = c.members if cols is None else cols
        ii, jj = np.meshgrid(rows, cols, indexing="ij")
        pos = self.structure.pattern.positions(ii.ravel(), jj.ravel())
        return self.values[pos].reshape(ii.shape)

    def zero_filled(self):
        E = self.structure.pattern
        out = np.zeros((E.dim, E.dim))
        out[E.indices, E.cols] = self.values
        out[E.cols, E.indices] = self.values
        return out

    def clique_blocks_pd(self):
        for r in range(len(self.structure.cliques)):
            try:
                np.linalg.cholesky(self.block(r))
            except np.linalg.LinAlgError:
                return False
        return True


@dataclass(frozen=True, eq=False)
class InverseCholeskyFactor:
    """``Lhat`` with ``inv(Xhat) = Lhat Lhat'``; values share the extended pattern."""

    factor: SparseLowerFactor

    @property
    def pattern(self):
        return self.factor.pattern

    def to_dense(self):
        return self.factor.to_dense()


@dataclass(frozen=True, eq=False)
class LegacyCompletionFactor:
    """``Xhat = L' D L`` with ``L = L_{l-1} ... L_1``.

    ``blocks[r]`` is ``D_{S_r S_r}``; ``wings[r]`` is the ``|U_r| x |S_r|``
    block ``inv(X_UU) X_US`` of the unit lower-triangular ``L_r``.
    """

    cliques: list
    n: int
    blocks: list
    wings: list


@njit(cache=True, nogil=True)
def inverse_factor_kernel(ptr, nS, posptr, pos, xvals, out):
    """Per clique: reverse, Cholesky, invert, scatter the first |S| columns.

    With ``P X_CC P = M M'`` the factor ``L_r = P inv(M)' P`` satisfies
    ``inv(X_CC) = L_r L_r'``, and ``L_r[i, j] = inv(M)[k-1-j, k-1-i]``.
    Returns -1 on success or the index of the first clique that is not
    positive definite.
    """
    for r in range(ptr.size - 1):
        k = ptr[r + 1] - ptr[r]
        base = posptr[r]
        a = np.empty((k, k))
        for i in range(k):
            for j in range(i + 1):
                a[i, j] = xvals[pos[base + (k - 1 - i) * k + (k - 1 - j)]]
        if cholesky_kernel(a) >= 0:
            return r
        minv = np.empty((k, k))
        lower_inverse_kernel(a, minv)
        for j in range(nS[r]):
            for i in range(j, k):
                out[pos[base + i * k + j]] = minv[k - 1 - j, k - 1 - i]
    return -1


def inverse_factor(x):
    """Factor ``Lhat`` of the inverse max-determinant completion of ``x``.

    Raises :class:`NotPositiveDefinite` with the clique index when a clique
    block is not positive definite.
    """
    st = x.structure
    ptr, _, nS, posptr, pos = st.clique_arrays
    out = np.zeros(st.pattern.nnz)
    status = inverse_factor_kernel(ptr, nS, posptr, pos, np.ascontiguousarray(x.values), out)
    if status >= 0:
        raise NotPositiveDefinite(status, f"clique block {status} is not positive definite")
    return InverseCholeskyFactor(SparseLowerFactor(st.pattern, out))


algorithm1_factorize = inverse_factor


def completed_apply(lhat, v):
    """``Xhat @ v`` via ``Lhat' \\ (Lhat \\ v)``."""
    x = np.array(v, dtype=np.float64, copy=True)
    pat = lhat.pattern
    llt_solve_kernel(pat.indptr, pat.indices, lhat.factor.values, x)
    return x


def legacy_factorize(x):
    st = x.structure
    blocks, wings = [], []
    for r, c in enumerate(st.cliques):
        try:
            np.linalg.cholesky(x.block(r))
        except np.linalg.LinAlgError:
            raise NotPositiveDefinite(r, f"clique block {r} is not positive definite") from None
        xss = x.block(r, c.S, c.S)
        if c.U.size:
            w = scipy.linalg.solve(x.block(r, c.U, c.U), x.block(r, c.U, c.S), assume_a="pos")
            blocks.append(xss - x.block(r, c.S, c.U) @ w)
            wings.append(w)
        else:
            blocks.append(xss)
            wings.append(np.zeros((0, c.S.size)))
    return LegacyCompletionFactor(st.cliques, st.n, blocks, wings)


def legacy_apply(f, v):
    """``Xhat @ v = L' D L v`` applied factor by factor."""
    w = np.array(v, dtype=np.float64, copy=True)
    for c, wing in zip(f.cliques, f.wings):
        if c.U.size:
            w[c.U] += wing @ w[c.S]
    for c, d in zip(f.cliques, f.blocks):
        w[c.S] = d @ w[c.S]
    for c, wing in zip(reversed(f.cliques), reversed(f.wings)):
        if c.U.size:
            w[c.S] += wing.T @ w[c.U]
    return w


def legacy_inverse_factor(f):
    """Dense ``inv(L) R`` where ``R`` is block diagonal with ``R_r R_r' = inv(D_r)``.

    Equals ``Lhat`` when the completion is computed correctly.
    """
    n = f.n
    linv = np.eye(n)
    # inv(L) = inv(L_1) ... inv(L_{l-1}), inv(L_r) = I - wing_r
    for c, wing in zip(reversed(f.cliques), reversed(f.wings)):
        if c.U.size:
            linv[c.U, :] -= wing @ linv[c.S, :]
    rootinv = np.zeros((n, n))
    for c, d in zip(f.cliques, f.blocks):
        rootinv[np.ix_(c.S, c.S)] = np.linalg.cholesky(np.linalg.inv(d))
    return linv @ rootinv


def maxdet_kkt_check(lhat, E):
    """Largest ``|(Lhat Lhat')_ij|`` over positions outside ``E``.

    ``lhat`` may be an :class:`InverseCholeskyFactor` or any
    :class:`SparseLowerFactor`, including one with entries off ``E``.
    """
    f = lhat.factor if isinstance(lhat, InverseCholeskyFactor) else lhat
    pat = f.pattern
    acc = {}
    for k in range(pat.dim):
        lo, hi = pat.indptr[k], pat.indptr[k + 1]
        rows = pat.indices[lo:hi]
        vals = f.values[lo:hi]
        if rows.size < 2:
            continue
        ii, jj = np.tril_indices(rows.size, -1)
        off = E.positions(rows[ii], rows[jj]) < 0
        if not np.any(off):
            continue
        keys = rows[ii[off]] * pat.dim + rows[jj[off]]
        prods = vals[ii[off]] * vals[jj[off]]
        for key, pr in zip(keys.tolist(), prods.tolist()):
            acc[key] = acc.get(key, 0.0) + pr
    return max((abs(v) for v in acc.values()), default=0.0)


def pattern_of(factor, tol=0.0):
    """Pattern of the structurally nonzero entries of ``factor``."""
    pat = factor.pattern
    keep = np.abs(factor.values) > tol
    return SymPattern.from_entries(pat.dim, pat.indices[keep], pat.cols[keep])
