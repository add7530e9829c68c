"""Sparse symmetric pattern machinery and sparse Cholesky.

Patterns are stored as the lower triangle in compressed-column form with the
diagonal first in every column. The same layout carries the numeric factor
of the dual matrix and the inverse factor of the completed primal matrix.
"""

import heapq
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from numba import njit

from .dense import PIVOT_RTOL
from .errors import NotChordal, NotPositiveDefinite

DEFAULT_MAX_FILL = 8


@dataclass(frozen=True, eq=False)
class SymPattern:
    """Lower-triangular pattern, diagonal always present.

    ``indices[indptr[j]:indptr[j + 1]]`` are the sorted rows ``i >= j`` of
    column ``j``; the first of them is ``j`` itself.
    """

    dim: int
    indptr: np.ndarray
    indices: np.ndarray

    @classmethod
    def from_entries(cls, dim, rows, cols):
        rows = np.asarray(rows, dtype=np.int64).ravel()
        cols = np.asarray(cols, dtype=np.int64).ravel()
        if rows.size and (min(rows.min(), cols.min()) < 0 or max(rows.max(), cols.max()) >= dim):
            raise IndexError("pattern index out of range")
        lo = np.concatenate([np.maximum(rows, cols), np.arange(dim)])
        hi = np.concatenate([np.minimum(rows, cols), np.arange(dim)])
        key = np.unique(hi * dim + lo)
        r, c = key % dim, key // dim
        indptr = np.zeros(dim + 1, dtype=np.int64)
        np.add.at(indptr, c + 1, 1)
        return cls(int(dim), np.cumsum(indptr), r.astype(np.int64))

    @classmethod
    def from_pairs(cls, dim, pairs):
        pairs = list(pairs)
        if not pairs:
            return cls.from_entries(dim, [], [])
        r, c = zip(*pairs)
        return cls.from_entries(dim, r, c)

    @classmethod
    def dense(cls, dim):
        r, c = np.tril_indices(dim)
        return cls.from_entries(dim, r, c)

    @property
    def nnz(self):
        return int(self.indices.size)

    def column(self, j):
        return self.indices[self.indptr[j]:self.indptr[j + 1]]

    def below(self, j):
        return self.indices[self.indptr[j] + 1:self.indptr[j + 1]]

    @cached_property
    def cols(self):
        return np.repeat(np.arange(self.dim), np.diff(self.indptr))

    @cached_property
    def keys(self):
        """Sorted ``col * dim + row`` keys, aligned with storage order."""
        return self.cols * self.dim + self.indices

    def entries(self):
        return set(zip(self.indices.tolist(), self.cols.tolist()))

    def full_count(self):
        """Number of positions in the symmetric (both-triangle) pattern."""
        return 2 * self.nnz - self.dim

    def positions(self, rows, cols):
        """Storage positions of ``(rows, cols)``; -1 where absent. Either triangle."""
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        key = np.minimum(rows, cols) * self.dim + np.maximum(rows, cols)
        pos = np.searchsorted(self.keys, key)
        pos = np.minimum(pos, self.nnz - 1)
        return np.where(self.keys[pos] == key, pos, -1)

    def contains(self, other):
        """True when ``other`` (same dim) is a sub-pattern of ``self``."""
        return other.dim == self.dim and bool(np.all(self.positions(other.indices, other.cols) >= 0))

    def permuted(self, perm):
        """Pattern of ``P A P'`` where new index ``k`` holds old index ``perm[k]``."""
        inv = inverse_permutation(perm)
        return SymPattern.from_entries(self.dim, inv[self.indices], inv[self.cols])

    def adjacency(self):
        """Neighbour sets of the undirected graph (no self loops)."""
        adj = [set() for _ in range(self.dim)]
        for j in range(self.dim):
            for i in self.below(j).tolist():
                adj[i].add(j)
                adj[j].add(i)
        return adj

    @cached_property
    def layout(self):
        return FactorLayout.build(self)

    def __eq__(self, other):
        if not isinstance(other, SymPattern):
            return NotImplemented
        return (
            self.dim == other.dim
            and np.array_equal(self.indptr, other.indptr)
            and np.array_equal(self.indices, other.indices)
        )

    __hash__ = None


@dataclass(frozen=True, eq=False)
class FactorLayout:
    """Row-oriented view of the strictly lower entries, for left-looking updates."""

    indptr: np.ndarray
    indices: np.ndarray
    rowptr: np.ndarray
    rowcol: np.ndarray
    rowpos: np.ndarray

    @classmethod
    def build(cls, p):
        cols = p.cols
        strict = np.flatnonzero(p.indices != cols)
        rows = p.indices[strict]
        order = np.lexsort((cols[strict], rows))
        rowptr = np.zeros(p.dim + 1, dtype=np.int64)
        np.add.at(rowptr, rows + 1, 1)
        return cls(
            p.indptr,
            p.indices,
            np.cumsum(rowptr),
            cols[strict][order].astype(np.int64),
            strict[order].astype(np.int64),
        )


@dataclass(frozen=True, eq=False)
class EliminationStructure:
    """``perm[k]`` is the original index eliminated ``k``-th."""

    perm: np.ndarray
    etree: np.ndarray
    colcounts: np.ndarray

    @property
    def inv_perm(self):
        return inverse_permutation(self.perm)


@dataclass(frozen=True, eq=False)
class SparseLowerFactor:
    """Lower-triangular factor whose values are aligned with ``pattern`` storage."""

    pattern: SymPattern
    values: np.ndarray

    @property
    def diag(self):
        return self.values[self.pattern.indptr[:-1]]

    def to_dense(self):
        out = np.zeros((self.pattern.dim, self.pattern.dim))
        out[self.pattern.indices, self.pattern.cols] = self.values
        return out


@dataclass(frozen=True, eq=False)
class Clique:
    """``members`` = ``S`` followed by ``U``; both sorted, 0-based."""

    members: np.ndarray
    S: np.ndarray
    U: np.ndarray

    @property
    def size(self):
        return int(self.members.size)


def inverse_permutation(perm):
    perm = np.asarray(perm, dtype=np.int64)
    inv = np.empty_like(perm)
    inv[perm] = np.arange(perm.size)
    return inv


def aggregate_pattern(problem):
    """Union of structural nonzeros of ``A_0..A_m``, plus the diagonal."""
    rows = np.concatenate([a.rows for a in problem.A])
    cols = np.concatenate([a.cols for a in problem.A])
    return SymPattern.from_entries(problem.n, rows, cols)


def minimum_degree_order(p):
    """Greedy minimum-degree elimination order, ties to the smallest index."""
    adj = p.adjacency()
    heap = [(len(a), v) for v, a in enumerate(adj)]
    heapq.heapify(heap)
    done = np.zeros(p.dim, dtype=bool)
    order = []
    while heap:
        deg, v = heapq.heappop(heap)
        if done[v] or deg != len(adj[v]):
            continue
        done[v] = True
        order.append(v)
        nbrs = adj[v]
        for u in nbrs:
            au = adj[u]
            au.discard(v)
            au |= nbrs
            au.discard(u)
            heapq.heappush(heap, (len(au), u))
        adj[v] = set()
    return np.asarray(order, dtype=np.int64)


def _symbolic_full(p):
    n = p.dim
    children = [[] for _ in range(n)]
    parent = np.full(n, -1, dtype=np.int64)
    struct = [None] * n
    for j in range(n):
        s = set(p.below(j).tolist())
        for c in children[j]:
            s.update(struct[c][1:].tolist())
        arr = np.fromiter(sorted(s), dtype=np.int64, count=len(s))
        struct[j] = arr
        if arr.size:
            parent[j] = arr[0]
            children[arr[0]].append(j)
    return parent, struct


def _postorder(parent):
    n = parent.size
    children = [[] for _ in range(n)]
    roots = []
    for j in range(n):
        if parent[j] < 0:
            roots.append(j)
        else:
            children[parent[j]].append(j)
    post = []
    for r in roots:
        stack = [(r, 0)]
        while stack:
            v, k = stack.pop()
            if k < len(children[v]):
                stack.append((v, k + 1))
                stack.append((children[v][k], 0))
            else:
                post.append(v)
    return np.asarray(post, dtype=np.int64)


def fill_reducing_order(p):
    """Minimum-degree order, postordered along its elimination tree."""
    md = minimum_degree_order(p)
    parent, _ = _symbolic_full(p.permuted(md))
    post = _postorder(parent)
    perm = md[post]
    parent, struct = _symbolic_full(p.permuted(perm))
    counts = np.array([s.size + 1 for s in struct], dtype=np.int64)
    return EliminationStructure(perm, parent, counts)


def symbolic_factorize(p, e):
    """Factor pattern of ``p`` permuted by ``e.perm`` (a chordal superset)."""
    pp = p.permuted(e.perm)
    _, struct = _symbolic_full(pp)
    n = p.dim
    rows = np.concatenate([np.arange(n)] + struct) if n else np.zeros(0, dtype=np.int64)
    cols = np.concatenate([np.arange(n)] + [np.full(s.size, j, dtype=np.int64) for j, s in enumerate(struct)])
    return SymPattern.from_entries(n, rows, cols)


def check_perfect_elimination(E):
    """Raise :class:`NotChordal` unless the identity order is a perfect elimination order."""
    for j in range(E.dim):
        b = E.below(j)
        if b.size > 1:
            if not np.all(np.isin(b[1:], E.below(b[0]), assume_unique=True)):
                raise NotChordal(j)


def _entries(k, s):
    return k * (k + 1) // 2 + k * s


def extract_cliques(E, e=None, max_fill=DEFAULT_MAX_FILL):
    """Clique list of the chordal pattern ``E`` (already in elimination order).

    Columns with nested structure form fundamental supernodes; a supernode is
    then absorbed into the immediately following parent supernode when the
    merge adds at most ``max_fill`` lower-triangle entries. Cliques come out
    in ascending column order, so every clique's ``U`` lies in a later one.
    """
    check_perfect_elimination(E)
    n = E.dim
    counts = np.diff(E.indptr)
    groups = []
    j = 0
    while j < n:
        first = j
        while j + 1 < n and counts[j] == counts[j + 1] + 1 and E.indices[E.indptr[j] + 1] == j + 1:
            j += 1
        cur = [first, j, E.below(j)]
        while groups:
            g = groups[-1]
            if not (g[1] + 1 == cur[0] and g[2].size and cur[0] <= g[2][0] <= cur[1]):
                break
            kc, kp = g[1] - g[0] + 1, cur[1] - cur[0] + 1
            sp = cur[2].size
            fill = _entries(kc + kp, sp) - _entries(kc, g[2].size) - _entries(kp, sp)
            if fill > max_fill:
                break
            groups.pop()
            cur = [g[0], cur[1], cur[2]]
        groups.append(cur)
        j += 1
    cliques = []
    for first, last, below in groups:
        S = np.arange(first, last + 1, dtype=np.int64)
        cliques.append(Clique(np.concatenate([S, below]), S, below.astype(np.int64)))
    return cliques


def clique_pattern(n, cliques):
    """``union_r C_r x C_r`` as a lower pattern."""
    rows, cols = [], []
    for c in cliques:
        r, k = np.tril_indices(c.size)
        rows.append(c.members[r])
        cols.append(c.members[k])
    if not rows:
        return SymPattern.from_entries(n, [], [])
    return SymPattern.from_entries(n, np.concatenate(rows), np.concatenate(cols))


@dataclass(frozen=True, eq=False)
class ChordalStructure:
    """Ordering, extended pattern and clique list shared by both primal and dual factors.

    Everything is expressed in the permuted index space: new index ``k``
    corresponds to original index ``perm[k]``.
    """

    perm: np.ndarray
    aggregate: SymPattern
    pattern: SymPattern
    cliques: list
    elimination: EliminationStructure

    @property
    def n(self):
        return self.pattern.dim

    @cached_property
    def inv_perm(self):
        return inverse_permutation(self.perm)

    @cached_property
    def clique_arrays(self):
        """Flattened clique data for compiled kernels.

        Returns ``(ptr, members, nS, posptr, pos)``: clique ``r`` has members
        ``members[ptr[r]:ptr[r+1]]`` and a dense ``k x k`` map of storage
        positions ``pos[posptr[r]:posptr[r+1]]`` (row-major, symmetric).
        """
        sizes = np.array([c.size for c in self.cliques], dtype=np.int64)
        ptr = np.concatenate([[0], np.cumsum(sizes)])
        members = np.concatenate([c.members for c in self.cliques])
        nS = np.array([c.S.size for c in self.cliques], dtype=np.int64)
        posptr = np.concatenate([[0], np.cumsum(sizes * sizes)])
        pos = np.empty(posptr[-1], dtype=np.int64)
        for r, c in enumerate(self.cliques):
            ii, jj = np.meshgrid(c.members, c.members, indexing="ij")
            pos[posptr[r]:posptr[r + 1]] = self.pattern.positions(ii.ravel(), jj.ravel())
        if np.any(pos < 0):
            raise NotChordal(-1)
        return ptr, members, nS, posptr, pos


def chordal_structure(p, max_fill=DEFAULT_MAX_FILL):
    """Order ``p``, extend it to a chordal pattern and extract its cliques."""
    e = fill_reducing_order(p)
    E0 = symbolic_factorize(p, e)
    cliques = extract_cliques(E0, e, max_fill=max_fill)
    E = clique_pattern(p.dim, cliques)
    return ChordalStructure(e.perm, p.permuted(e.perm), E, cliques, e)


@njit(cache=True, nogil=True)
def factorize_kernel(indptr, indices, rowptr, rowcol, rowpos, a, out):
    """Left-looking Cholesky on a chordal pattern; -1 on success else failing column."""
    n = indptr.size - 1
    dmax = 0.0
    for j in range(n):
        if a[indptr[j]] > dmax:
            dmax = a[indptr[j]]
    tol = PIVOT_RTOL * dmax
    x = np.zeros(n)
    for j in range(n):
        for p in range(indptr[j], indptr[j + 1]):
            x[indices[p]] = a[p]
        for t in range(rowptr[j], rowptr[j + 1]):
            k = rowcol[t]
            p = rowpos[t]
            ljk = out[p]
            for q in range(p, indptr[k + 1]):
                x[indices[q]] -= ljk * out[q]
        d = x[j]
        if not d > tol:
            return j
        d = np.sqrt(d)
        out[indptr[j]] = d
        x[j] = 0.0
        for p in range(indptr[j] + 1, indptr[j + 1]):
            i = indices[p]
            out[p] = x[i] / d
            x[i] = 0.0
    return -1


@njit(cache=True, nogil=True)
def forward_kernel(indptr, indices, vals, x):
    """In place ``L y = x``; skips the leading zero segment and zero pivots' updates."""
    n = indptr.size - 1
    start = 0
    while start < n and x[start] == 0.0:
        start += 1
    for j in range(start, n):
        xj = x[j]
        if xj != 0.0:
            xj /= vals[indptr[j]]
            x[j] = xj
            for p in range(indptr[j] + 1, indptr[j + 1]):
                x[indices[p]] -= vals[p] * xj


@njit(cache=True, nogil=True)
def backward_kernel(indptr, indices, vals, x):
    """In place ``L' y = x``."""
    n = indptr.size - 1
    for j in range(n - 1, -1, -1):
        s = x[j]
        for p in range(indptr[j] + 1, indptr[j + 1]):
            s -= vals[p] * x[indices[p]]
        x[j] = s / vals[indptr[j]]


@njit(cache=True, nogil=True)
def llt_solve_kernel(indptr, indices, vals, x):
    """In place ``(L L') y = x``."""
    forward_kernel(indptr, indices, vals, x)
    backward_kernel(indptr, indices, vals, x)


def factorize_on(E, values):
    """Numeric factor of the symmetric matrix given by ``values`` on ``E`` storage."""
    lay = E.layout
    out = np.zeros(E.nnz)
    status = factorize_kernel(lay.indptr, lay.indices, lay.rowptr, lay.rowcol, lay.rowpos,
                              np.ascontiguousarray(values, dtype=np.float64), out)
    if status >= 0:
        raise NotPositiveDefinite(status)
    return SparseLowerFactor(E, out)


def numeric_factorize(p, E, values_on_p):
    """Cholesky factor on ``E`` of the matrix with ``values_on_p`` on ``p`` (``p`` within ``E``)."""
    pos = E.positions(p.indices, p.cols)
    if np.any(pos < 0):
        raise ValueError("input pattern is not contained in the factor pattern")
    vals = np.zeros(E.nnz)
    vals[pos] = values_on_p
    return factorize_on(E, vals)


def sparse_solve(N, b):
    """``(N N')^{-1} b``."""
    x = np.array(b, dtype=np.float64, copy=True)
    pat = N.pattern
    llt_solve_kernel(pat.indptr, pat.indices, N.values, x)
    return x


def running_intersection_violations(cliques):
    """Cliques ``r`` whose overlap with later cliques is not ``U_r`` inside one later clique."""
    bad = []
    later = set()
    sets = [set(c.members.tolist()) for c in cliques]
    for r in range(len(cliques) - 1, -1, -1):
        inter = sets[r] & later
        if inter != set(cliques[r].U.tolist()):
            bad.append(r)
        elif inter and not any(inter <= sets[s] for s in range(r + 1, len(cliques))):
            bad.append(r)
        later |= sets[r]
    return sorted(bad)
