"""Independent reference computations used only by the tests."""

import itertools

import numpy as np

from mcsdp.sparse import SymPattern, chordal_structure


def maxdet_completion(x0, pattern, tol=1e-12, max_iter=200):
    """Maximise ``log det`` over the entries of ``x0`` outside ``pattern``.

    Damped Newton on the free symmetric pairs, started at the positive
    definite ``x0``; stops when the gradient's largest entry is below ``tol``
    (or stagnates at roundoff). Shares no code with the completion formulas.
    """
    n = x0.shape[0]
    keys = set(zip(pattern.indices.tolist(), pattern.cols.tolist()))
    free = [(i, j) for i in range(n) for j in range(i) if (i, j) not in keys]
    x = np.array(x0, dtype=float)
    if not free:
        return x
    fi = np.array([f[0] for f in free])
    fj = np.array([f[1] for f in free])

    def logdet(m):
        sign, val = np.linalg.slogdet(m)
        return val if sign > 0 else -np.inf

    f = logdet(x)
    for _ in range(max_iter):
        w = np.linalg.inv(x)
        g = 2.0 * w[fi, fj]
        if np.max(np.abs(g)) < tol:
            break
        h = -2.0 * (w[np.ix_(fi, fi)] * w[np.ix_(fj, fj)] + w[np.ix_(fi, fj)] * w[np.ix_(fj, fi)])
        step = -np.linalg.solve(h, g)
        t = 1.0
        while t > 1e-12:
            y = x.copy()
            y[fi, fj] += t * step
            y[fj, fi] += t * step
            fy = logdet(y)
            if fy >= f + 1e-4 * t * float(g @ step) or (t < 1.0 and fy >= f):
                break
            t *= 0.5
        else:
            break
        if fy <= f and t < 1.0:
            x = y
            break
        x, f = y, fy
    return x


def random_pattern(rng, n, density):
    pairs = [(i, j) for i in range(n) for j in range(i) if rng.random() < density]
    return SymPattern.from_pairs(n, pairs)


def random_spd(rng, n, shift=None):
    g = rng.standard_normal((n, n))
    return g @ g.T + (n if shift is None else shift) * np.eye(n)


def random_chordal_instance(seed, n, density=0.25, max_fill=0):
    """(structure, dense x0) with ``x0`` a positive definite completion candidate."""
    rng = np.random.default_rng(seed)
    p = random_pattern(rng, n, density)
    st = chordal_structure(p, max_fill=max_fill)
    return st, random_spd(rng, n)


def brute_force_fill(p, perm):
    """Fill-in count of eliminating ``p`` in order ``perm`` (explicit graph elimination)."""
    adj = p.adjacency()
    fill = 0
    alive = set(range(p.dim))
    for v in perm:
        nb = [u for u in adj[v] if u in alive]
        for a, b in itertools.combinations(nb, 2):
            if b not in adj[a]:
                adj[a].add(b)
                adj[b].add(a)
                fill += 1
        alive.discard(v)
    return fill


def maximal_cliques_bruteforce(n, pairs):
    adj = {i: set() for i in range(n)}
    for a, b in pairs:
        adj[a].add(b)
        adj[b].add(a)
    cliques = []
    for size in range(n, 0, -1):
        for cand in itertools.combinations(range(n), size):
            if all(b in adj[a] for a, b in itertools.combinations(cand, 2)):
                s = set(cand)
                if not any(s <= c for c in cliques):
                    cliques.append(s)
    return cliques


def dense_scm(x, y, mats):
    """``B_ij = (X A_i inv(Y)) . A_j`` with dense matrices."""
    yinv = np.linalg.inv(y)
    m = len(mats)
    b = np.empty((m, m))
    for i in range(m):
        t = x @ mats[i] @ yinv
        for j in range(m):
            b[i, j] = np.sum(t * mats[j])
    return b
