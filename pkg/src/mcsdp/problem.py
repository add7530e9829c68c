"""Standard-form SDP data.

    (P)  min  A_0 . X   s.t.  A_k . X = b_k (k = 1..m),  X psd
    (D)  max  b' z      s.t.  sum_k A_k z_k + Y = A_0,   Y psd

All indices are 0-based.
"""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class SymMatrix:
    """Sparse symmetric matrix held as its lower triangle (``rows >= cols``).

    Entries are canonical: sorted by ``(col, row)``, no duplicates, no
    explicit zeros.
    """

    n: int
    rows: np.ndarray
    cols: np.ndarray
    vals: np.ndarray

    @classmethod
    def from_entries(cls, n, rows, cols, vals):
        """Build from (i, j, v) triplets in either triangle; duplicates are summed."""
        rows = np.asarray(rows, dtype=np.int64).ravel()
        cols = np.asarray(cols, dtype=np.int64).ravel()
        vals = np.asarray(vals, dtype=np.float64).ravel()
        if not (rows.size == cols.size == vals.size):
            raise ValueError("triplet arrays differ in length")
        if rows.size and (min(rows.min(), cols.min()) < 0 or max(rows.max(), cols.max()) >= n):
            raise IndexError("entry index out of range")
        lo = np.maximum(rows, cols)
        hi = np.minimum(rows, cols)
        key = hi * n + lo
        order = np.argsort(key, kind="stable")
        key = key[order]
        v = vals[order]
        uniq, start = np.unique(key, return_index=True)
        summed = np.add.reduceat(v, start) if v.size else v
        keep = summed != 0.0
        uniq = uniq[keep]
        return cls(int(n), uniq % n, uniq // n, summed[keep])

    @classmethod
    def from_dense(cls, a):
        a = np.asarray(a, dtype=np.float64)
        r, c = np.nonzero(np.tril(a))
        return cls.from_entries(a.shape[0], r, c, a[r, c])

    @classmethod
    def zeros(cls, n):
        e = np.zeros(0, dtype=np.int64)
        return cls(int(n), e, e.copy(), np.zeros(0))

    @property
    def nnz(self):
        return int(self.vals.size)

    def to_dense(self):
        out = np.zeros((self.n, self.n))
        out[self.rows, self.cols] = self.vals
        out[self.cols, self.rows] = self.vals
        return out

    def inner(self, x):
        """Frobenius inner product with the dense symmetric ``x``."""
        w = np.where(self.rows == self.cols, 1.0, 2.0)
        return float(np.sum(w * self.vals * x[self.rows, self.cols]))

    def max_abs(self):
        return float(np.max(np.abs(self.vals))) if self.nnz else 0.0

    def permuted(self, inv_perm):
        """Relabel index ``i`` as ``inv_perm[i]``."""
        inv_perm = np.asarray(inv_perm)
        return SymMatrix.from_entries(self.n, inv_perm[self.rows], inv_perm[self.cols], self.vals)

    def __eq__(self, other):
        if not isinstance(other, SymMatrix):
            return NotImplemented
        return (
            self.n == other.n
            and np.array_equal(self.rows, other.rows)
            and np.array_equal(self.cols, other.cols)
            and np.array_equal(self.vals, other.vals)
        )

    __hash__ = None


@dataclass(frozen=True, eq=False)
class SdpProblem:
    """``A[0]`` is the objective matrix, ``A[1..m]`` the constraint matrices."""

    n: int
    A: tuple
    b: np.ndarray
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "A", tuple(self.A))
        object.__setattr__(self, "b", np.asarray(self.b, dtype=np.float64).ravel())
        if self.n < 1:
            raise ValueError("n must be positive")
        if len(self.A) < 2:
            raise ValueError("need an objective and at least one constraint")
        if self.b.size != len(self.A) - 1:
            raise ValueError(f"b has {self.b.size} entries for {len(self.A) - 1} constraints")
        for k, a in enumerate(self.A):
            if a.n != self.n:
                raise ValueError(f"A_{k} has dimension {a.n}, expected {self.n}")

    @property
    def m(self):
        return len(self.A) - 1

    def permuted(self, inv_perm):
        return SdpProblem(self.n, [a.permuted(inv_perm) for a in self.A], self.b, self.name)

    def data_scale(self):
        bmax = float(np.max(np.abs(self.b))) if self.b.size else 0.0
        return max(1.0, bmax, max(a.max_abs() for a in self.A))

    def __eq__(self, other):
        if not isinstance(other, SdpProblem):
            return NotImplemented
        return (
            self.n == other.n
            and len(self.A) == len(other.A)
            and np.array_equal(self.b, other.b)
            and all(x == y for x, y in zip(self.A, other.A))
        )

    __hash__ = None
