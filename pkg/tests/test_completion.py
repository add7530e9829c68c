import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mcsdp.completion import (PartialMatrix, completed_apply, inverse_factor, legacy_apply,
                              legacy_factorize, legacy_inverse_factor, maxdet_kkt_check, pattern_of)
from mcsdp.errors import NotPositiveDefinite
from mcsdp.sparse import SparseLowerFactor, SymPattern, chordal_structure
from oracles import maxdet_completion, random_chordal_instance


def path3():
    s = chordal_structure(SymPattern.from_pairs(3, [(1, 0), (2, 1)]), max_fill=0)
    x = np.array([[2.0, 1.0, 0.0], [1.0, 2.0, 1.0], [0.0, 1.0, 2.0]])
    return s, PartialMatrix.from_dense(s, x)


def dense_completion(lhat, n):
    return np.column_stack([completed_apply(lhat, e) for e in np.eye(n)])


def test_legacy_single_clique():
    s = chordal_structure(SymPattern.dense(3))
    x = np.array([[3.0, 1.0, 0.5], [1.0, 2.0, 0.2], [0.5, 0.2, 1.0]])
    f = legacy_factorize(PartialMatrix.from_dense(s, x))
    assert len(f.blocks) == 1 and f.wings[0].size == 0
    np.testing.assert_allclose(f.blocks[0], x)


def test_legacy_identity():
    s, _ = path3()
    f = legacy_factorize(PartialMatrix.scaled_identity(s, 1.0))
    for d in f.blocks:
        np.testing.assert_array_equal(d, np.eye(d.shape[0]))
    assert all(not np.any(w) for w in f.wings)
    v = np.array([1.0, -2.0, 3.0])
    np.testing.assert_array_equal(legacy_apply(f, v), v)


def test_path_example():
    s, x = path3()
    f = legacy_factorize(x)
    assert f.blocks[0][0, 0] == pytest.approx(1.5)
    e3 = np.array([0.0, 0.0, 1.0])
    np.testing.assert_allclose(legacy_apply(f, e3), [0.5, 1.0, 2.0])
    lhat = inverse_factor(x)
    np.testing.assert_allclose(completed_apply(lhat, e3), [0.5, 1.0, 2.0])
    assert np.linalg.inv(lhat.to_dense() @ lhat.to_dense().T)[0, 2] == pytest.approx(0.5)


def test_diagonal_factor():
    s = chordal_structure(SymPattern.from_pairs(2, [(1, 0)]))
    lhat = inverse_factor(PartialMatrix.from_dense(s, np.diag([4.0, 9.0])))
    np.testing.assert_allclose(lhat.to_dense(), np.diag([0.5, 1.0 / 3.0]))


def test_identity_factor_applies_identity():
    s, _ = path3()
    lhat = inverse_factor(PartialMatrix.scaled_identity(s, 1.0))
    v = np.array([0.3, -1.0, 2.0])
    np.testing.assert_allclose(completed_apply(lhat, v), v)


def test_inverse_factor_rejects_indefinite_clique():
    s, _ = path3()
    bad = PartialMatrix.from_dense(s, np.array([[1.0, 2.0, 0.0], [2.0, 1.0, 0.0], [0.0, 0.0, 1.0]]))
    with pytest.raises(NotPositiveDefinite) as err:
        inverse_factor(bad)
    assert err.value.index == 0
    with pytest.raises(NotPositiveDefinite):
        legacy_factorize(bad)


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 14), st.integers(0, 2**31 - 1), st.sampled_from([0, 8]))
def test_completion_agrees_with_oracle_and_legacy(n, seed, max_fill):
    s, x0 = random_chordal_instance(seed, n, max_fill=max_fill)
    x = PartialMatrix.from_dense(s, x0)
    lhat = inverse_factor(x)
    xhat = dense_completion(lhat, n)
    oracle = maxdet_completion(x0, s.pattern)
    np.testing.assert_allclose(xhat, oracle, rtol=1e-7, atol=1e-7 * np.abs(oracle).max())
    leg = np.column_stack([legacy_apply(legacy_factorize(x), e) for e in np.eye(n)])
    np.testing.assert_allclose(xhat, leg, rtol=1e-9, atol=1e-9 * np.abs(leg).max())
    # the completion keeps the given entries
    E = s.pattern
    np.testing.assert_allclose(xhat[E.indices, E.cols], x.values, rtol=1e-10, atol=1e-10)


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 20), st.integers(0, 2**31 - 1))
def test_factor_matches_legacy_product_form(n, seed):
    s, x0 = random_chordal_instance(seed, n)
    x = PartialMatrix.from_dense(s, x0)
    lhat = inverse_factor(x).to_dense()
    np.testing.assert_allclose(lhat, legacy_inverse_factor(legacy_factorize(x)), atol=1e-10)


def test_factor_support_within_pattern():
    for seed in range(10):
        s, x0 = random_chordal_instance(seed, 15)
        lhat = inverse_factor(PartialMatrix.from_dense(s, x0))
        assert s.pattern.contains(pattern_of(lhat.factor))
        assert maxdet_kkt_check(lhat, s.pattern) == 0.0


def test_kkt_check_dense_pattern_is_vacuous():
    s = chordal_structure(SymPattern.dense(4))
    lhat = inverse_factor(PartialMatrix.scaled_identity(s, 2.0))
    assert maxdet_kkt_check(lhat, s.pattern) == 0.0


def test_kkt_check_flags_corrupted_factor():
    s, x = path3()
    lhat = inverse_factor(x).to_dense()
    lhat[2, 0] = 0.7  # (3,1) lies outside the path pattern
    corrupt = SymPattern.dense(3)
    f = SparseLowerFactor(corrupt, lhat[corrupt.indices, corrupt.cols])
    assert maxdet_kkt_check(f, s.pattern) > 0.0
