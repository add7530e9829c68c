"""Benchmark and test problem generators."""

from dataclasses import dataclass

import numpy as np

from .problem import SdpProblem, SymMatrix


@dataclass(frozen=True)
class Graph:
    n: int
    edges: tuple  # sorted pairs (a, b), a < b, 0-based

    @classmethod
    def from_edges(cls, n, edges):
        norm = sorted({(min(a, b), max(a, b)) for a, b in edges if a != b})
        if norm and (norm[0][0] < 0 or max(b for _, b in norm) >= n):
            raise ValueError("edge endpoint out of range")
        return cls(int(n), tuple(norm))

    @classmethod
    def complete(cls, n):
        return cls.from_edges(n, [(i, j) for i in range(n) for j in range(i + 1, n)])

    @classmethod
    def empty(cls, n):
        return cls(int(n), ())

    def non_edges(self):
        es = set(self.edges)
        return [(i, j) for i in range(self.n) for j in range(i + 1, self.n) if (i, j) not in es]


@dataclass(frozen=True)
class LatticeGraph(Graph):
    p: int = 1
    q: int = 1


def lattice_graph(p, q):
    """``p x q`` grid: vertex ``i + j*p``; edges along each of the ``q`` columns and across them."""
    if p < 1 or q < 1:
        raise ValueError("p and q must be positive")
    edges = [(i + j * p, i + 1 + j * p) for j in range(q) for i in range(p - 1)]
    edges += [(i + j * p, i + (j + 1) * p) for j in range(q - 1) for i in range(p)]
    return LatticeGraph(p * q, tuple(sorted(edges)), p, q)


def maxclique_sdp(g):
    """Lovasz bound in minimisation form: ``min -ee'.X``, ``I.X = 1``, ``X_ij = 0`` off the edges."""
    n = g.n
    r, c = np.tril_indices(n)
    A = [SymMatrix.from_entries(n, r, c, -np.ones(r.size))]
    A.append(SymMatrix.from_entries(n, np.arange(n), np.arange(n), np.ones(n)))
    b = [1.0]
    for i, j in g.non_edges():
        A.append(SymMatrix.from_entries(n, [j], [i], [1.0]))
        b.append(0.0)
    return SdpProblem(n, A, b, name=f"maxclique-n{n}")


def maxcut_sdp(g, weights=None):
    """Max-cut relaxation ``min (W - diag(We)).X``, ``X_ii = 1``.

    ``weights`` gives one nonnegative weight per edge of ``g`` (default 1).
    """
    n = g.n
    w = np.ones(len(g.edges)) if weights is None else np.asarray(weights, dtype=np.float64)
    if w.shape != (len(g.edges),) or np.any(w < 0):
        raise ValueError("need one nonnegative weight per edge")
    a = np.array([e[0] for e in g.edges], dtype=np.int64)
    b = np.array([e[1] for e in g.edges], dtype=np.int64)
    deg = np.zeros(n)
    np.add.at(deg, a, w)
    np.add.at(deg, b, w)
    rows = np.concatenate([b, np.arange(n)])
    cols = np.concatenate([a, np.arange(n)])
    A = [SymMatrix.from_entries(n, rows, cols, np.concatenate([w, -deg]))]
    for i in range(n):
        A.append(SymMatrix.from_entries(n, [i], [i], [1.0]))
    return SdpProblem(n, A, np.ones(n), name=f"maxcut-n{n}")


def random_weights(g, seed):
    return np.random.default_rng(seed).uniform(0.0, 1.0, len(g.edges))


def random_chordal_sdp(seed, n, m, density=0.2):
    """Sparse SDP with strictly feasible primal and dual, hence attained strong duality.

    ``b_k = A_k . X0`` for a random positive definite ``X0`` and
    ``A_0 = sum_k y_k A_k + S0`` with ``S0`` positive definite on the pattern.
    """
    if not 1 <= n <= 30:
        raise ValueError("n must be in 1..30")
    rng = np.random.default_rng(seed)
    lo_r, lo_c = np.tril_indices(n, -1)
    keep = rng.random(lo_r.size) < density
    pr, pc = lo_r[keep], lo_c[keep]
    slots = n + pr.size
    if m < 1 or m > slots:
        raise ValueError(f"m must be in 1..{slots} for this pattern")
    all_r = np.concatenate([np.arange(n), pr])
    all_c = np.concatenate([np.arange(n), pc])
    while True:
        mats, vecs = [], []
        for _ in range(m):
            k = min(slots, int(rng.integers(1, 4)))
            pick = rng.choice(slots, size=k, replace=False)
            vals = rng.uniform(-1.0, 1.0, k)
            a = SymMatrix.from_entries(n, all_r[pick], all_c[pick], vals)
            if a.nnz == 0:
                break
            mats.append(a)
            vecs.append(a.to_dense()[np.tril_indices(n)])
        if len(mats) == m and np.linalg.matrix_rank(np.array(vecs)) == m:
            break
    g = rng.standard_normal((n, n))
    x0 = g @ g.T / n + np.eye(n)
    b = np.array([a.inner(x0) for a in mats])
    y = rng.standard_normal(m)
    off = rng.uniform(-1.0, 1.0, pr.size)
    diag = np.ones(n)
    np.add.at(diag, pr, np.abs(off))
    np.add.at(diag, pc, np.abs(off))
    s0 = SymMatrix.from_entries(n, all_r, all_c, np.concatenate([diag, off])).to_dense()
    a0 = s0 + sum(yk * a.to_dense() for yk, a in zip(y, mats))
    r, c = np.tril_indices(n)
    sel = np.isin(r * n + c, all_r * n + all_c)
    A0 = SymMatrix.from_entries(n, r[sel], c[sel], a0[r[sel], c[sel]])
    return SdpProblem(n, [A0] + mats, b, name=f"random-s{seed}-n{n}-m{m}")
