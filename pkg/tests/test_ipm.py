import numpy as np
import pytest

from mcsdp import ipm
from mcsdp.completion import PartialMatrix, completed_apply, inverse_factor
from mcsdp.errors import MaxIterations, NotPositiveDefinite, StepTooSmall
from mcsdp.generators import Graph, lattice_graph, maxcut_sdp, random_chordal_sdp
from mcsdp.problem import SdpProblem, SymMatrix
from mcsdp.sparse import SymPattern, chordal_structure, factorize_on
from oracles import dense_scm


def scalar_problem():
    return SdpProblem(1, [SymMatrix.from_dense(np.array([[2.0]])),
                          SymMatrix.from_dense(np.array([[3.0]]))], [6.0])


def advanced_state(prob, steps=3, params=None):
    params = params or ipm.SolverParams()
    model = ipm.Model(prob)
    state = ipm.initial_point(model, params)
    for _ in range(steps):
        state = ipm.iterate(model, state, params)
    return model, state


def dense_parts(model, state):
    n = model.n
    xhat = np.column_stack([completed_apply(state.lhat, e) for e in np.eye(n)])
    y = model.scatter(state.Y)
    mats = [a.to_dense() for a in model.problem.A]
    return xhat, y, mats


def test_params_validation():
    for bad in [dict(beta=0.0), dict(gamma=1.0), dict(epsilon=0.0), dict(lambda0=-1.0),
                dict(scm_mode="sparse"), dict(threads=0)]:
        with pytest.raises(ValueError):
            ipm.SolverParams(**bad)


def test_default_initial_scale():
    prob = maxcut_sdp(Graph.from_edges(3, [(0, 1), (1, 2)]), [1.0, 4.0])
    assert ipm.SolverParams().initial_scale(prob) == 100.0 * 5.0


def test_initial_point():
    prob = maxcut_sdp(Graph.complete(3))
    model = ipm.Model(prob)
    s = ipm.initial_point(model, ipm.SolverParams(lambda0=100.0))
    assert s.mu == pytest.approx(1e4, rel=1e-12)
    assert s.residuals.primal_infeas == pytest.approx(99.0)
    assert not np.any(s.z)
    np.testing.assert_allclose(s.Yfactor.diag, 10.0)
    assert s.X.clique_blocks_pd()


def test_initial_dual_residual():
    prob = maxcut_sdp(Graph.complete(3))
    s = ipm.initial_point(ipm.Model(prob), ipm.SolverParams(lambda0=1.0))
    a0 = prob.A[0].to_dense()
    assert s.residuals.dual_infeas == pytest.approx(np.max(np.abs(a0 - np.eye(3))))


def test_scm_identity_gives_gram_matrix():
    prob = random_chordal_sdp(4, 10, 8)
    model = ipm.Model(prob)
    s = ipm.initial_point(model, ipm.SolverParams(lambda0=1.0))
    mats = [a.to_dense() for a in model.problem.A[1:]]
    for j in range(model.m):
        col, _ = ipm.assemble_scm_column(model, s, j, 0.2)
        want = [np.sum(mats[i] * mats[j]) for i in range(j, model.m)]
        np.testing.assert_allclose(col, want, atol=1e-12)


def test_scm_maxcut_entries():
    model, s = advanced_state(maxcut_sdp(lattice_graph(3, 3)), steps=2)
    xhat, y, _ = dense_parts(model, s)
    yinv = np.linalg.inv(y)
    # constraint k fixes the diagonal entry of permuted vertex c[k]
    c = np.array([a.rows[0] for a in model.problem.A[1:]])
    for j in range(model.m):
        col, _ = ipm.assemble_scm_column(model, s, j, 0.2)
        want = xhat[c[j:], c[j]] * yinv[c[j:], c[j]]
        np.testing.assert_allclose(col, want, rtol=1e-10, atol=1e-14)


@pytest.mark.parametrize("seed", range(5))
def test_scm_and_g_match_dense_oracle(seed):
    model, s = advanced_state(random_chordal_sdp(seed, 10, 9), steps=seed % 3 + 1)
    xhat, y, mats = dense_parts(model, s)
    B, ghat, _, _ = ipm.assemble_scm(model, s, 0.2)
    want = dense_scm(xhat, y, mats[1:])
    np.testing.assert_allclose(np.tril(B), np.tril(want), rtol=1e-10, atol=1e-10 * np.abs(want).max())
    yinv = np.linalg.inv(y)
    G = model.scatter(s.G)
    R = 0.2 * s.mu * yinv - xhat - xhat @ G @ yinv
    g_want = np.array([np.sum(a * R) for a in mats[1:]])
    scale = np.abs(g_want).max()
    np.testing.assert_allclose(ghat, g_want, rtol=1e-10, atol=1e-10 * scale)
    np.testing.assert_allclose(ipm.compute_g(model, s, 0.2), ghat, rtol=0, atol=0)


def test_g_with_identities():
    prob = random_chordal_sdp(3, 8, 6)
    model = ipm.Model(prob)
    s = ipm.initial_point(model, ipm.SolverParams(lambda0=1.0))
    mats = [a.to_dense() for a in model.problem.A[1:]]
    s.mu = 1.0 / 0.2
    G = model.scatter(s.G)
    np.testing.assert_allclose(ipm.compute_g(model, s, 0.2), [-np.sum(a * G) for a in mats], atol=1e-12)
    s.G = np.zeros_like(s.G)
    s.mu = 2.0 / 0.2
    np.testing.assert_allclose(ipm.compute_g(model, s, 0.2), [np.trace(a) for a in mats], atol=1e-12)


def test_solve_sce_examples():
    g = np.array([1.0, -2.0, 3.0])
    np.testing.assert_array_equal(ipm.solve_sce(np.eye(3), g), g)
    np.testing.assert_allclose(ipm.solve_sce(np.diag([2.0, 4.0]), np.array([2.0, 8.0])), [1.0, 2.0])
    rng = np.random.default_rng(1)
    a = rng.standard_normal((12, 12))
    B = a @ a.T + 12 * np.eye(12)
    w = rng.standard_normal(12)
    np.testing.assert_allclose(ipm.solve_sce(np.tril(B), B @ w), w, atol=1e-10)


def test_solve_sce_rejects_singular():
    with pytest.raises(NotPositiveDefinite):
        ipm.solve_sce(np.ones((2, 2)), np.ones(2))
    with pytest.raises(NotPositiveDefinite):
        ipm.solve_sce(np.diag([1.0, -1.0]), np.ones(2))


def test_dx_vanishes_on_central_path():
    rng = np.random.default_rng(2)
    prob = random_chordal_sdp(5, 12, 10)
    model = ipm.Model(prob)
    E = model.E
    y = np.zeros((12, 12))
    off = E.indices != E.cols
    y[E.indices[off], E.cols[off]] = rng.uniform(-0.3, 0.3, off.sum())
    y = y + y.T
    y += np.diag(np.abs(y).sum(axis=1) + 1.0)
    yv = y[E.indices, E.cols]
    beta, mu = 0.2, 3.0
    xbar = PartialMatrix.from_dense(model.structure, beta * mu * np.linalg.inv(y))
    s = ipm.IterateState(xbar, yv, factorize_on(E, yv), inverse_factor(xbar), np.zeros(model.m), mu)
    dX, _, _ = ipm.compute_dX(model, s, np.zeros(E.nnz), beta)
    assert np.abs(dX).max() <= 1e-12 * beta * mu


def test_dx_identity_fixed_point():
    model = ipm.Model(random_chordal_sdp(6, 9, 7))
    s = ipm.initial_point(model, ipm.SolverParams(lambda0=1.0))
    s.mu = 1.0 / 0.2
    dX, _, _ = ipm.compute_dX(model, s, np.zeros(model.E.nnz), 0.2)
    assert np.abs(dX).max() < 1e-14


@pytest.mark.parametrize("seed", range(4))
def test_dx_matches_dense_oracle(seed):
    model, s = advanced_state(random_chordal_sdp(10 + seed, 10, 8), steps=2)
    rng = np.random.default_rng(seed)
    dY = np.zeros(model.E.nnz)
    dY[model.agg_pos] = rng.standard_normal(model.agg_pos.size)
    dX, _, _ = ipm.compute_dX(model, s, dY, 0.2)
    xhat, y, _ = dense_parts(model, s)
    yinv = np.linalg.inv(y)
    dxh = 0.2 * s.mu * yinv - xhat - xhat @ model.scatter(dY) @ yinv
    want = 0.5 * (dxh + dxh.T)
    E = model.E
    np.testing.assert_allclose(dX, want[E.indices, E.cols], rtol=1e-9, atol=1e-9 * np.abs(want).max())


def identity_blocks():
    s = chordal_structure(SymPattern.from_pairs(4, [(1, 0), (2, 1), (3, 2)]), max_fill=0)
    model = ipm.Model(SdpProblem(4, [SymMatrix.zeros(4), SymMatrix.from_dense(np.eye(4))], [1.0]),
                      structure=s)
    return model, PartialMatrix.scaled_identity(s, 1.0), np.where(model.is_diag, 1.0, 0.0)


def test_primal_step_examples():
    model, x, eye = identity_blocks()
    assert ipm.primal_step_length(model, x, -eye) == 1.0
    assert ipm.primal_step_length(model, x, -2.0 * eye) == pytest.approx(0.5, rel=1e-14)
    assert ipm.primal_step_length(model, x, 3.0 * eye) == 1.0
    bad = PartialMatrix(x.structure, -eye)
    with pytest.raises(NotPositiveDefinite):
        ipm.primal_step_length(model, bad, eye)


def test_primal_step_matches_eigenvalues():
    model, s = advanced_state(random_chordal_sdp(3, 12, 10), steps=2)
    dX = s.last["dX"]
    alpha = ipm.primal_step_length(model, s.X, dX)
    want = 1.0
    for r, c in enumerate(model.structure.cliques):
        xb = s.X.block(r)
        db = PartialMatrix(model.structure, dX).block(r)
        li = np.linalg.inv(np.linalg.cholesky(xb))
        lam = np.linalg.eigvalsh(li @ db @ li.T)[0]
        if lam < 0:
            want = min(want, -1.0 / lam)
    assert alpha == pytest.approx(want, rel=1e-10)


def test_dual_step_examples():
    model, _, eye = identity_blocks()
    E = model.E
    assert ipm.dual_step_length(E, eye, np.zeros(E.nnz)) == 1.0
    assert ipm.dual_step_length(E, eye, eye) == 1.0
    a = ipm.dual_step_length(E, eye, -2.0 * eye)
    assert 0.5 - 2.0 ** -12 <= a <= 0.5
    with pytest.raises(StepTooSmall):
        ipm.dual_step_length(E, eye, -1e10 * eye)


def test_stopping_check_thresholds():
    p = ipm.SolverParams(epsilon=1e-7)
    s = ipm.IterateState(None, None, None, None, None, 1.0)
    s.residuals = ipm.Residuals(1e-9, 1e-9, 1e-8, 0.0, 0.0)
    assert ipm.stopping_check(s, p)
    s.residuals = ipm.Residuals(1e-9, 2e-7, 1e-8, 0.0, 0.0)
    assert not ipm.stopping_check(s, p)
    model = ipm.Model(maxcut_sdp(Graph.from_edges(2, [(0, 1)])))
    assert not ipm.stopping_check(ipm.initial_point(model, ipm.SolverParams(lambda0=100.0)), p)


def test_scalar_problem():
    res = ipm.solve(scalar_problem())
    assert res.converged and res.rel_gap <= 1e-7
    assert res.primal_objective == pytest.approx(4.0, abs=1e-6)
    assert res.completed_x()[0, 0] == pytest.approx(2.0, abs=1e-6)


def test_single_edge_maxcut():
    res = ipm.solve(maxcut_sdp(Graph.from_edges(2, [(0, 1)])))
    assert res.converged
    assert res.primal_objective == pytest.approx(-4.0, rel=1e-6)
    assert res.completed_x()[0, 1] == pytest.approx(-1.0, abs=1e-4)


def test_exact_optimum_converges_immediately():
    params = ipm.SolverParams()
    model = ipm.Model(scalar_problem())
    s = ipm.initial_point(model, params)
    s.residuals = ipm.Residuals(0.0, 0.0, 0.0, 4.0, 4.0)
    assert ipm.stopping_check(s, params)


def test_max_iterations():
    prob = maxcut_sdp(lattice_graph(3, 3))
    res = ipm.solve(prob, ipm.SolverParams(max_iter=3))
    assert res.status == "max_iterations" and res.iterations == 3
    params = ipm.SolverParams(max_iter=0)
    model = ipm.Model(prob)
    with pytest.raises(MaxIterations):
        ipm.iterate(model, ipm.initial_point(model, params), params)


def test_breakdown_on_dependent_constraints():
    a = SymMatrix.from_entries(2, [0], [0], [1.0])
    prob = SdpProblem(2, [SymMatrix.from_dense(np.eye(2)), a, a], [1.0, 1.0])
    res = ipm.solve(prob)
    assert res.status == "breakdown"
    assert "NotPositiveDefinite" in res.message


@pytest.mark.parametrize("make", [
    lambda: random_chordal_sdp(21, 18, 20),
    lambda: maxcut_sdp(lattice_graph(5, 4)),
])
def test_per_iteration_properties(make):
    prob = make()
    states = []
    res = ipm.solve(prob, ipm.SolverParams(check_invariants=True), callback=states.append)
    assert res.converged
    model = res.model
    for s in states:
        assert s.mu == pytest.approx(model.inner(s.X.values, s.Y) / model.n, rel=1e-12)
        last = s.last
        assert last["sce_residual"] <= 1e-9 * last["rhs_norm"]
        prev_G = last["dY"] + model.combine(last["dz"])
        dy_check = prev_G - model.combine(last["dz"])
        np.testing.assert_allclose(last["dY"], dy_check, atol=1e-11)
        assert np.all(last["dY"][np.setdiff1d(np.arange(model.E.nnz), model.agg_pos)] == 0)
        assert s.X.clique_blocks_pd()
    mus = [h["mu"] for h in res.history]
    assert mus[-1] < mus[0]


def test_dy_formula_from_previous_state():
    params = ipm.SolverParams()
    model = ipm.Model(random_chordal_sdp(8, 14, 12))
    s0 = ipm.initial_point(model, params)
    s1 = ipm.iterate(model, s0, params)
    np.testing.assert_allclose(s1.last["dY"], s0.G - model.combine(s1.last["dz"]), atol=1e-11)


def test_objective_needs_only_pattern_entries():
    res = ipm.solve(random_chordal_sdp(2, 12, 10))
    xhat = res.completed_x()
    a0 = res.model.original.A[0].to_dense()
    assert np.sum(a0 * xhat) == pytest.approx(res.primal_objective, rel=1e-10, abs=1e-10)


def test_thread_count_does_not_change_results():
    prob = maxcut_sdp(lattice_graph(6, 5))
    base = ipm.solve(prob, ipm.SolverParams(threads=1))
    for u in (2, 4):
        other = ipm.solve(prob, ipm.SolverParams(threads=u))
        assert other.primal_objective == base.primal_objective
        assert other.dual_objective == base.dual_objective
        assert np.array_equal(other.z, base.z)


def test_cost_ordered_queue_same_answer():
    prob = random_chordal_sdp(9, 20, 25)
    a = ipm.solve(prob)
    b = ipm.solve(prob, ipm.SolverParams(cost_ordered=True, threads=2))
    assert a.primal_objective == b.primal_objective
    assert np.array_equal(a.z, b.z)


def test_timings_account_for_total():
    res = ipm.solve(maxcut_sdp(lattice_graph(10, 5)))
    t = res.timings
    parts = t["s_elements"] + t["s_cholesky"] + t["p_matrix"] + t["other"]
    assert parts == pytest.approx(t["total"], rel=1e-9)
    assert t["sub_s_elements"] <= t["s_elements"]
    assert t["sub_p_matrix"] <= t["p_matrix"]


def test_solution_views_in_original_order():
    prob = maxcut_sdp(lattice_graph(3, 2))
    res = ipm.solve(prob)
    x = res.completed_x()
    np.testing.assert_allclose(np.diag(x), 1.0, atol=1e-6)
    for (i, j), v in res.x_on_pattern().items():
        assert v == pytest.approx(x[i, j], abs=1e-9)
    y = res.y_dense()
    a0 = prob.A[0].to_dense()
    zmat = sum(zk * a.to_dense() for zk, a in zip(res.z, prob.A[1:]))
    np.testing.assert_allclose(a0 - zmat, y, atol=1e-6)


def test_direction_satisfies_primal_newton_equation():
    params = ipm.SolverParams()
    model = ipm.Model(random_chordal_sdp(13, 16, 15))
    s0 = ipm.initial_point(model, params)
    s0 = ipm.iterate(model, s0, params)
    s1 = ipm.iterate(model, s0, params)
    dX = s1.last["dX"]
    r = model.b - model.constraint_dots(s0.X.values)
    np.testing.assert_allclose(model.constraint_dots(dX), r, atol=1e-9 * max(1.0, np.abs(r).max()))
