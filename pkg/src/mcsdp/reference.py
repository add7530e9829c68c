"""Dense HKM interior-point solver.

Same parameters, start point and stopping rule as the completion solver,
but every matrix is dense and step lengths come from exact eigenvalues.
Intended as an oracle for small problems.
"""

from dataclasses import dataclass

import numpy as np

from .errors import MaxIterations, NotPositiveDefinite
from .ipm import SolverParams


@dataclass
class DenseState:
    X: np.ndarray
    Y: np.ndarray
    z: np.ndarray
    iteration: int = 0


@dataclass
class DenseResult:
    status: str
    iterations: int
    primal_objective: float
    dual_objective: float
    rel_gap: float
    primal_infeas: float
    dual_infeas: float
    X: np.ndarray
    Y: np.ndarray
    z: np.ndarray
    message: str = ""

    @property
    def converged(self):
        return self.status == "converged"


def _full_entries(problem):
    """Full symmetric COO of constraints: (con, row, col, val)."""
    cons, rows, cols, vals = [], [], [], []
    for k, a in enumerate(problem.A[1:]):
        off = a.rows != a.cols
        rows.append(np.concatenate([a.rows, a.cols[off]]))
        cols.append(np.concatenate([a.cols, a.rows[off]]))
        vals.append(np.concatenate([a.vals, a.vals[off]]))
        cons.append(np.full(rows[-1].size, k))
    return np.concatenate(cons), np.concatenate(rows), np.concatenate(cols), np.concatenate(vals)


def _max_step(M, D):
    """Largest ``alpha`` in ``(0, 1]`` keeping ``M + alpha D`` positive semidefinite."""
    L = np.linalg.cholesky(M)
    Li = np.linalg.inv(L)
    lam = np.linalg.eigvalsh(Li @ D @ Li.T)[0]
    return 1.0 if lam >= 0 else min(1.0, -1.0 / lam)


def dense_scm(X, Yinv, entries, m):
    con, r, c, v = entries
    B = np.empty((m, m))
    for i in range(m):
        s = con == i
        # X A_i inv(Y) from the full entries of A_i
        T = (X[:, r[s]] * v[s]) @ Yinv[c[s], :]
        B[i] = np.bincount(con, weights=v * T[r, c], minlength=m)
    return 0.5 * (B + B.T)


def solve_dense(problem, params=None):
    params = SolverParams() if params is None else params
    n, m = problem.n, problem.m
    A = [a.to_dense() for a in problem.A]
    b = np.asarray(problem.b, dtype=np.float64)
    entries = _full_entries(problem)
    lam = params.initial_scale(problem)
    X = lam * np.eye(n)
    Y = lam * np.eye(n)
    z = np.zeros(m)
    beta, gamma, eps = params.beta, params.gamma, params.epsilon
    it = 0
    status, message = "converged", ""

    def combine(w):
        return np.tensordot(w, np.array(A[1:]), axes=1) if m else np.zeros((n, n))

    while True:
        Ax = np.array([np.sum(a * X) for a in A[1:]])
        G = A[0] - combine(z) - Y
        pobj = float(np.sum(A[0] * X))
        dobj = float(b @ z)
        pinf = float(np.max(np.abs(b - Ax)))
        dinf = float(np.max(np.abs(G)))
        gap = abs(pobj - dobj) / max(1.0, (abs(pobj) + abs(dobj)) / 2.0)
        if pinf <= eps and dinf <= eps and gap <= eps:
            break
        try:
            if it >= params.max_iter:
                raise MaxIterations(f"reached {params.max_iter} iterations")
            mu = float(np.sum(X * Y)) / n
            Yinv = np.linalg.inv(Y)
            Yinv = 0.5 * (Yinv + Yinv.T)
            B = dense_scm(X, Yinv, entries, m)
            R = beta * mu * Yinv - X - X @ G @ Yinv
            ghat = np.array([np.sum(a * R) for a in A[1:]])
            try:
                Lb = np.linalg.cholesky(B)
            except np.linalg.LinAlgError:
                raise NotPositiveDefinite(-1, "Schur complement matrix is not positive definite") from None
            dz = np.linalg.solve(Lb.T, np.linalg.solve(Lb, (b - Ax) - ghat))
            dY = G - combine(dz)
            dXh = beta * mu * Yinv - X - X @ dY @ Yinv
            dX = 0.5 * (dXh + dXh.T)
            ap = _max_step(X, dX)
            ad = _max_step(Y, dY)
        except MaxIterations as exc:
            status, message = "max_iterations", str(exc)
            break
        except (NotPositiveDefinite, np.linalg.LinAlgError) as exc:
            status, message = "breakdown", str(exc)
            break
        X = X + gamma * ap * dX
        Y = Y + gamma * ad * dY
        z = z + gamma * ad * dz
        it += 1
    return DenseResult(status, it, pobj, dobj, gap, pinf, dinf, X, Y, z, message)
