"""Primal-dual interior-point solver built on positive matrix completion.

The primal iterate is kept only on the extended chordal pattern ``E`` and is
touched through the factor ``Lhat`` of the inverse of its max-determinant
completion. The dual matrix ``Y`` is factored as ``N N'`` on the same
pattern. Each iteration computes the HKM direction:

* the Schur complement matrix ``B_ij = (Xhat A_i inv(Y)) . A_j`` and the
  right-hand side, column by column over the nonzero columns of ``A_j``;
* ``dz`` from ``B dz = rhs``, then ``dY = G - sum_k A_k dz_k``;
* ``dX`` column by column, kept on ``E`` and symmetrised.

All work happens in the permuted index space of the chordal structure.
"""

import threading
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import _kernels as K
from .completion import PartialMatrix, completed_apply, inverse_factor
from .errors import (MaxIterations, McsdpError, NoConvergence, NotPositiveDefinite,
                     StepTooSmall, WorkerPanic)
from .scheduler import resolve_threads, run_dx_assembly, run_scm_assembly
from .sparse import (DEFAULT_MAX_FILL, SparseLowerFactor, aggregate_pattern, chordal_structure,
                     factorize_on, running_intersection_violations)

PAIR_BATCH = 64
MIN_DUAL_STEP = 2.0 ** -30
BISECTION_STEPS = 12


@dataclass
class SolverParams:
    beta: float = 0.2
    gamma: float = 0.9
    epsilon: float = 1e-7
    lambda0: float = None  # None: 100 * max(1, max|b|, max ||A_k||_max)
    max_iter: int = 100
    scm_mode: str = "dense"
    threads: int = 1
    max_fill: int = DEFAULT_MAX_FILL
    cost_ordered: bool = False
    check_invariants: bool = False

    def __post_init__(self):
        if not 0.0 < self.beta < 1.0:
            raise ValueError("beta must lie in (0, 1)")
        if not 0.0 < self.gamma < 1.0:
            raise ValueError("gamma must lie in (0, 1)")
        if not self.epsilon > 0.0:
            raise ValueError("epsilon must be positive")
        if self.lambda0 is not None and not self.lambda0 > 0.0:
            raise ValueError("lambda0 must be positive")
        if self.max_iter < 0:
            raise ValueError("max_iter must be nonnegative")
        if self.scm_mode != "dense":
            raise ValueError("only the dense Schur complement is supported")
        if self.threads is not None and self.threads < 1:
            raise ValueError("threads must be positive")

    def initial_scale(self, problem):
        return float(self.lambda0) if self.lambda0 is not None else 100.0 * problem.data_scale()


def _lower_triplets(mats):
    """Concatenated lower entries of ``mats`` with offsets."""
    ptr = np.zeros(len(mats) + 1, dtype=np.int64)
    for k, a in enumerate(mats):
        ptr[k + 1] = ptr[k] + a.nnz
    rows = np.concatenate([a.rows for a in mats]).astype(np.int64)
    cols = np.concatenate([a.cols for a in mats]).astype(np.int64)
    vals = np.concatenate([a.vals for a in mats]).astype(np.float64)
    return ptr, rows, cols, vals


class Model:
    """Problem data laid out for the compiled kernels (permuted space)."""

    def __init__(self, problem, max_fill=DEFAULT_MAX_FILL, structure=None):
        self.original = problem
        if structure is None:
            structure = chordal_structure(aggregate_pattern(problem), max_fill=max_fill)
        self.structure = structure
        self.problem = problem.permuted(structure.inv_perm)
        self.E = structure.pattern
        self.n, self.m = problem.n, problem.m
        self.b = np.asarray(self.problem.b, dtype=np.float64)
        E = self.E
        lay = E.layout
        self.ip, self.ii = lay.indptr, lay.indices
        self.rowptr, self.rowcol, self.rowpos = lay.rowptr, lay.rowcol, lay.rowpos
        self.is_diag = E.indices == E.cols
        self.weight = np.where(self.is_diag, 1.0, 2.0)

        A = self.problem.A
        a0 = A[0]
        self.a0_on_E = np.zeros(E.nnz)
        self.a0_on_E[E.positions(a0.rows, a0.cols)] = a0.vals

        # constraints as lower triplets, for v1' A_i v2
        self.tptr, self.trow, self.tcol, self.tval = _lower_triplets(A[1:])
        self.tpos = E.positions(self.trow, self.tcol)
        self.tcon = np.repeat(np.arange(self.m), np.diff(self.tptr))
        self.tweight = np.where(self.trow == self.tcol, 1.0, 2.0)
        self.a0pos = E.positions(a0.rows, a0.cols)
        self.a0w = np.where(a0.rows == a0.cols, 1.0, 2.0) * a0.vals

        # aggregate pattern entries, where G and dY can be nonzero
        agg = structure.aggregate
        self.agg_rows = agg.indices.astype(np.int64)
        self.agg_cols = agg.cols.astype(np.int64)
        self.agg_pos = E.positions(agg.indices, agg.cols)

        # nonzero columns of each constraint, full symmetric entries per column
        conptr = [0]
        ccol, centptr, crow, cval = [], [0], [], []
        for a in A[1:]:
            r = np.concatenate([a.rows, a.cols[a.rows != a.cols]])
            c = np.concatenate([a.cols, a.rows[a.rows != a.cols]])
            v = np.concatenate([a.vals, a.vals[a.rows != a.cols]])
            order = np.lexsort((r, c))
            r, c, v = r[order], c[order], v[order]
            uc, start = np.unique(c, return_index=True)
            ccol.extend(uc.tolist())
            bounds = np.append(start, c.size)
            centptr.extend((centptr[-1] + bounds[1:]).tolist())
            crow.extend(r.tolist())
            cval.extend(v.tolist())
            conptr.append(len(ccol))
        self.conptr = np.array(conptr, dtype=np.int64)
        self.ccol = np.array(ccol, dtype=np.int64)
        self.centptr = np.array(centptr, dtype=np.int64)
        self.crow = np.array(crow, dtype=np.int64)
        self.cval = np.array(cval, dtype=np.float64)

    def column_counts(self):
        return np.diff(self.conptr)

    def constraint_dots(self, xvals):
        """``A_k . X`` for ``k = 1..m`` from values on ``E``."""
        return np.bincount(self.tcon, weights=self.tweight * self.tval * xvals[self.tpos],
                           minlength=self.m)

    def objective_dot(self, xvals):
        return float(np.dot(self.a0w, xvals[self.a0pos]))

    def combine(self, z):
        """``sum_k z_k A_k`` as values on ``E``."""
        return np.bincount(self.tpos, weights=self.tval * z[self.tcon], minlength=self.E.nnz)

    def inner(self, u, v):
        return float(np.dot(self.weight * u, v))

    def scatter(self, vals):
        """Dense symmetric matrix (permuted space) from values on ``E``."""
        E = self.E
        out = np.zeros((self.n, self.n))
        out[E.indices, E.cols] = vals
        out[E.cols, E.indices] = vals
        return out


@dataclass
class Residuals:
    primal_infeas: float
    dual_infeas: float
    rel_gap: float
    primal_obj: float
    dual_obj: float


@dataclass
class IterateState:
    X: PartialMatrix
    Y: np.ndarray  # values on E
    Yfactor: SparseLowerFactor
    lhat: object
    z: np.ndarray
    mu: float
    iteration: int = 0
    residuals: Residuals = None
    G: np.ndarray = None  # dual residual on E
    last: dict = field(default_factory=dict)


def compute_residuals(model, X, Y, z):
    x = X.values
    G = model.a0_on_E - model.combine(z) - Y
    pobj = model.objective_dot(x)
    dobj = float(model.b @ z)
    pinf = float(np.max(np.abs(model.b - model.constraint_dots(x)))) if model.m else 0.0
    dinf = float(np.max(np.abs(G))) if G.size else 0.0
    gap = abs(pobj - dobj) / max(1.0, (abs(pobj) + abs(dobj)) / 2.0)
    return Residuals(pinf, dinf, gap, pobj, dobj), G


def _finish_state(model, X, Y, N, z, iteration, lhat=None):
    lhat = inverse_factor(X) if lhat is None else lhat
    res, G = compute_residuals(model, X, Y, z)
    mu = model.inner(X.values, Y) / model.n
    return IterateState(X, Y, N, lhat, z, mu, iteration, res, G)


def initial_point(model, params):
    lam = params.initial_scale(model.original)
    E = model.E
    X = PartialMatrix.scaled_identity(model.structure, lam)
    Y = np.where(model.is_diag, lam, 0.0)
    N = factorize_on(E, Y)
    return _finish_state(model, X, Y, N, np.zeros(model.m), 0)


class _Workspace:
    """Per-thread scratch buffers for the column kernels."""

    def __init__(self, n, batch):
        self.V1 = np.empty((batch, n))
        self.V2 = np.empty((batch, n))
        self.y = np.empty(n)
        self.w = np.empty(n)


def _scm_column_task(model, state, beta, g_on_agg, use_g, sub_times, threads_local):
    lp = state.lhat.factor.values
    nv = state.Yfactor.values
    bm = beta * state.mu
    xdots = model.constraint_dots(state.X.values)
    m = model.m
    gr, gc = model.agg_rows, model.agg_cols

    def task(j):
        ws = threads_local()
        acc = np.zeros(m - j)
        ys = xg = 0.0
        t0, t1 = model.conptr[j], model.conptr[j + 1]
        sub = 0.0
        for s in range(t0, t1, PAIR_BATCH):
            e = min(t1, s + PAIR_BATCH)
            c0 = time.perf_counter()
            K.pair_solves(s, e, model.ccol, model.centptr, model.crow, model.cval,
                          model.ip, model.ii, lp, nv, ws.V1, ws.V2)
            sub += time.perf_counter() - c0
            a, b = K.pair_accumulate(j, s, e, model.ccol, ws.V1, ws.V2, model.tptr, model.trow,
                                     model.tcol, model.tval, gr, gc, g_on_agg, use_g, acc)
            ys += a
            xg += b
        sub_times.append(sub)
        ghat = bm * ys - xdots[j] - xg
        return acc, ghat

    return task


def _thread_local_workspace(n):
    local = threading.local()

    def get():
        ws = getattr(local, "ws", None)
        if ws is None:
            ws = local.ws = _Workspace(n, PAIR_BATCH)
        return ws

    return get


def assemble_scm(model, state, beta, threads=1, order=None, log=False):
    """Returns ``(B lower, ghat, stats, substitution_time)``.

    ``ghat_k = A_k . (beta mu inv(Y) - Xhat - Xhat G inv(Y))``; the SCE
    right-hand side is ``b - A.X - ghat``.
    """
    g_on_agg = np.ascontiguousarray(state.G[model.agg_pos])
    use_g = bool(np.any(g_on_agg != 0.0))
    sub_times = []
    task = _scm_column_task(model, state, beta, g_on_agg, use_g, sub_times,
                            _thread_local_workspace(model.n))
    B, ghat, stats = run_scm_assembly(model.m, task, threads, order, log)
    return B, ghat, stats, float(sum(sub_times))


def assemble_scm_column(model, state, j, beta):
    """Column ``j`` (0-based) of the Schur complement matrix, rows ``i >= j``, and ``ghat_j``."""
    g_on_agg = np.ascontiguousarray(state.G[model.agg_pos])
    task = _scm_column_task(model, state, beta, g_on_agg, bool(np.any(g_on_agg != 0.0)), [],
                            _thread_local_workspace(model.n))
    return task(j)


def compute_g(model, state, beta):
    """``ghat_k = A_k . (beta mu inv(Y) - Xhat - Xhat G inv(Y))`` for every constraint."""
    return np.array([assemble_scm_column(model, state, j, beta)[1] for j in range(model.m)])


def solve_sce(B, g, refine=2):
    """Solve ``B dz = g`` with ``B`` given by its lower triangle.

    Dense Cholesky plus up to ``refine`` steps of iterative refinement.
    Raises :class:`NotPositiveDefinite` when ``B`` is not numerically positive definite.
    """
    B = np.tril(B)
    B = B + np.tril(B, -1).T
    g = np.asarray(g, dtype=np.float64)
    try:
        c = scipy.linalg.cho_factor(B, lower=True, check_finite=True)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NotPositiveDefinite(-1, f"Schur complement matrix is not positive definite ({exc})") from None
    d = np.diag(c[0])
    if d.size and d.min() ** 2 <= 1e-15 * np.max(np.diag(B)):
        raise NotPositiveDefinite(int(np.argmin(d)), "Schur complement matrix is numerically singular")
    dz = scipy.linalg.cho_solve(c, g)
    gn = np.linalg.norm(g)
    for _ in range(refine):
        r = g - B @ dz
        if np.linalg.norm(r) <= 1e-14 * gn:
            break
        dz = dz + scipy.linalg.cho_solve(c, r)
    return dz


def compute_dY(model, state, dz):
    return state.G - model.combine(dz)


def compute_dX(model, state, dY, beta, threads=1, log=False):
    """Symmetrised ``dX`` on ``E``. Returns ``(dX, stats, substitution_time)``."""
    E = model.E
    low = np.zeros(E.nnz)
    up = np.zeros(E.nnz)
    lp = state.lhat.factor.values
    nv = state.Yfactor.values
    bm = beta * state.mu
    dy_vals = np.ascontiguousarray(dY[model.agg_pos])
    gr, gc = model.agg_rows, model.agg_cols
    get_ws = _thread_local_workspace(model.n)
    sub_times = []

    def task(c):
        ws = get_ws()
        t0 = time.perf_counter()
        K.unit_solve(c, model.ip, model.ii, nv, ws.y)
        t1 = time.perf_counter()
        K.unit_plus_symv(c, ws.y, gr, gc, dy_vals, ws.w)
        t2 = time.perf_counter()
        K.llt_solve_kernel(model.ip, model.ii, lp, ws.w)
        t3 = time.perf_counter()
        K.dx_store(c, bm, ws.y, ws.w, model.ip, model.ii, model.rowptr, model.rowcol,
                   model.rowpos, low, up)
        sub_times.append((t1 - t0) + (t3 - t2))

    stats = run_dx_assembly(model.n, task, threads, log)
    dX = np.where(model.is_diag, low, 0.5 * (low + up))
    return dX, stats, float(sum(sub_times))


def primal_step_length(model, X, dX):
    ptr, _, _, posptr, pos = model.structure.clique_arrays
    alpha, bad, ok = K.primal_step_kernel(ptr, posptr, pos, np.ascontiguousarray(X.values),
                                          np.ascontiguousarray(dX))
    if bad >= 0:
        raise NotPositiveDefinite(int(bad), f"clique block {bad} of X is not positive definite")
    if not ok:
        raise NoConvergence("Jacobi eigenvalue sweep did not converge")
    return float(alpha)


def _factors(E, vals):
    try:
        factorize_on(E, vals)
        return True
    except NotPositiveDefinite:
        return False


def dual_step_length(E, Y, dY):
    """Largest ``alpha`` in ``(0, 1]`` found by halving then bisection with ``Y + alpha dY`` factorable."""
    if not np.any(dY):
        return 1.0
    alpha, fail = 1.0, None
    while not _factors(E, Y + alpha * dY):
        fail = alpha
        alpha *= 0.5
        if alpha < MIN_DUAL_STEP:
            raise StepTooSmall("dual step length fell below 2**-30")
    if fail is None:
        return 1.0
    lo, hi = alpha, fail
    for _ in range(BISECTION_STEPS):
        mid = 0.5 * (lo + hi)
        if _factors(E, Y + mid * dY):
            lo = mid
        else:
            hi = mid
    return lo


def stopping_check(state, params):
    r = state.residuals
    return (r.primal_infeas <= params.epsilon and r.dual_infeas <= params.epsilon
            and r.rel_gap <= params.epsilon)


def check_invariants(model, state):
    """Structural checks of one iterate; raises ``AssertionError`` on violation."""
    st = model.structure
    E = st.pattern
    lp = state.lhat.pattern
    assert E.contains(lp), "Lhat has entries outside E"
    assert E.contains(st.aggregate), "aggregate pattern not contained in E"
    owners = np.concatenate([c.S for c in st.cliques])
    assert np.array_equal(np.sort(owners), np.arange(model.n)), "S_r do not partition the indices"
    assert not running_intersection_violations(st.cliques), "running intersection violated"
    assert state.X.clique_blocks_pd(), "clique block of X not positive definite"


def _timed(bucket, key):
    class _Ctx:
        def __enter__(self):
            self.t = time.perf_counter()

        def __exit__(self, *exc):
            bucket[key] = bucket.get(key, 0.0) + time.perf_counter() - self.t
            return False

    return _Ctx()


def iterate(model, state, params, timings=None, threads=1, log=False):
    """One HKM step; returns the next :class:`IterateState`."""
    if state.iteration >= params.max_iter:
        raise MaxIterations(f"reached {params.max_iter} iterations")
    tm = {} if timings is None else timings
    beta, gamma = params.beta, params.gamma
    order = None
    if params.cost_ordered:
        order = np.argsort(-model.column_counts(), kind="stable")

    with _timed(tm, "s_elements"):
        B, ghat, sstats, ssub = assemble_scm(model, state, beta, threads, order, log)
    tm["sub_s_elements"] = tm.get("sub_s_elements", 0.0) + _scale_sub(ssub, sstats)
    rhs = (model.b - model.constraint_dots(state.X.values)) - ghat

    with _timed(tm, "s_cholesky"):
        dz = solve_sce(B, rhs)

    with _timed(tm, "other"):
        dY = compute_dY(model, state, dz)

    with _timed(tm, "p_matrix"):
        dX, pstats, psub = compute_dX(model, state, dY, beta, threads, log)
    tm["sub_p_matrix"] = tm.get("sub_p_matrix", 0.0) + _scale_sub(psub, pstats)

    with _timed(tm, "other"):
        ap = primal_step_length(model, state.X, dX)
        ad = dual_step_length(model.E, state.Y, dY)
        X = PartialMatrix(model.structure, state.X.values + gamma * ap * dX)
        Y = state.Y + gamma * ad * dY
        z = state.z + gamma * ad * dz
        N = factorize_on(model.E, Y)
        new = _finish_state(model, X, Y, N, z, state.iteration + 1)
    new.last = {
        "B": B, "ghat": ghat, "rhs": rhs, "dz": dz, "dY": dY, "dX": dX,
        "alpha_p": ap, "alpha_d": ad,
        "sce_residual": float(np.linalg.norm((np.tril(B) + np.tril(B, -1).T) @ dz - rhs)),
        "rhs_norm": float(np.linalg.norm(rhs)),
        "claims_scm": sstats.claims, "claims_dx": pstats.claims,
    }
    if params.check_invariants:
        check_invariants(model, new)
    return new


def _scale_sub(sub, stats):
    """Convert summed per-thread substitution time into its share of the phase wall time."""
    busy = sum(stats.busy)
    if busy <= 0.0:
        return 0.0
    return min(stats.wall, sub * stats.wall / busy)


@dataclass
class SolveResult:
    status: str  # "converged", "max_iterations", "breakdown"
    iterations: int
    primal_objective: float
    dual_objective: float
    rel_gap: float
    primal_infeas: float
    dual_infeas: float
    z: np.ndarray
    timings: dict
    threads: int
    history: list
    message: str = ""
    model: Model = None
    state: IterateState = None

    @property
    def converged(self):
        return self.status == "converged"

    def x_on_pattern(self):
        """``{(i, j): X_ij}`` over the extended pattern in original indices (``i >= j``)."""
        E, perm = self.model.E, self.model.structure.perm
        out = {}
        for r, c, v in zip(perm[E.indices].tolist(), perm[E.cols].tolist(), self.state.X.values.tolist()):
            out[(max(r, c), min(r, c))] = v
        return out

    def completed_x(self):
        """Dense max-determinant completion in original indices (small problems only)."""
        n = self.model.n
        cols = np.column_stack([completed_apply(self.state.lhat, e) for e in np.eye(n)])
        inv = self.model.structure.inv_perm
        return cols[np.ix_(inv, inv)]

    def y_dense(self):
        inv = self.model.structure.inv_perm
        return self.model.scatter(self.state.Y)[np.ix_(inv, inv)]


def solve(problem, params=None, model=None, callback=None, log=False):
    """Run the matrix-completion interior-point method to convergence."""
    params = SolverParams() if params is None else params
    threads = resolve_threads(params.threads)
    warmup()
    t_start = time.perf_counter()
    tm = {"s_elements": 0.0, "s_cholesky": 0.0, "p_matrix": 0.0, "other": 0.0,
          "sub_s_elements": 0.0, "sub_p_matrix": 0.0}
    model = Model(problem, params.max_fill) if model is None else model
    state = initial_point(model, params)
    if params.check_invariants:
        check_invariants(model, state)
    history = [_history_row(state)]
    status, message = "converged", ""
    try:
        while not stopping_check(state, params):
            state = iterate(model, state, params, tm, threads, log)
            history.append(_history_row(state))
            if callback is not None:
                callback(state)
    except MaxIterations as exc:
        status, message = "max_iterations", str(exc)
    except WorkerPanic as exc:
        status, message = "breakdown", str(exc)
        if not isinstance(exc.cause, McsdpError):
            raise
    except (NotPositiveDefinite, StepTooSmall, NoConvergence) as exc:
        status, message = "breakdown", f"{type(exc).__name__}: {exc}"
    tm["total"] = time.perf_counter() - t_start
    tm["other"] = tm["total"] - tm["s_elements"] - tm["s_cholesky"] - tm["p_matrix"]
    r = state.residuals
    return SolveResult(status, state.iteration, r.primal_obj, r.dual_obj, r.rel_gap,
                       r.primal_infeas, r.dual_infeas, state.z.copy(), tm, threads, history,
                       message, model, state)


_warm = False


def warmup():
    """Load the compiled kernels once so their start-up cost stays out of the timings."""
    global _warm
    if _warm:
        return
    from .problem import SdpProblem, SymMatrix

    a0 = SymMatrix.from_entries(2, [0, 1, 1], [0, 0, 1], [-1.0, 1.0, -1.0])
    cons = [SymMatrix.from_entries(2, [i], [i], [1.0]) for i in range(2)]
    model = Model(SdpProblem(2, [a0] + cons, [1.0, 1.0]))
    params = SolverParams()
    iterate(model, initial_point(model, params), params)
    _warm = True


def _history_row(state):
    r = state.residuals
    return {"iteration": state.iteration, "mu": state.mu, "primal_obj": r.primal_obj,
            "dual_obj": r.dual_obj, "primal_infeas": r.primal_infeas,
            "dual_infeas": r.dual_infeas, "rel_gap": r.rel_gap,
            "alpha_p": state.last.get("alpha_p"), "alpha_d": state.last.get("alpha_d")}
