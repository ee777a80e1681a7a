"""Property-based checks of invariants that hold for any input."""

import numpy as np
from hypothesis import assume, given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from sgmtl.core import hard_assignment, one_hot_membership
from sgmtl.evaluation import check_merge_proposition, check_split_proposition, group_recovery, rademacher_bound
from sgmtl.objective import fusion_penalty, regularizer
from sgmtl.u_step import project_column_simplex
from sgmtl.w_step import soft_threshold

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)
vectors = st.integers(1, 8).flatmap(lambda n: arrays(float, n, elements=finite))


def _weights_and_membership(draw, d_max=5, m_max=5, n_max=3):
    d = draw(st.integers(1, d_max))
    m = draw(st.integers(1, m_max))
    n = draw(st.integers(1, n_max))
    W = draw(arrays(float, (d, m), elements=st.floats(-10, 10)))
    raw = draw(arrays(float, (n, m), elements=st.floats(0.01, 1.0)))
    return W, raw / raw.sum(axis=0)


@st.composite
def weights_and_membership(draw):
    return _weights_and_membership(draw)


@given(vectors)
def test_projection_lands_on_simplex_and_is_idempotent(v):
    p = project_column_simplex(v)
    assert np.all(p >= 0) and abs(p.sum() - 1.0) <= 1e-9
    np.testing.assert_allclose(project_column_simplex(p), p, atol=1e-9)


@given(vectors, st.floats(-100, 100))
def test_projection_ignores_constant_shift(v, c):
    np.testing.assert_allclose(project_column_simplex(v + c), project_column_simplex(v), atol=1e-7)


@given(vectors)
def test_projection_is_closest_among_vertices(v):
    p = project_column_simplex(v)
    for k in range(v.size):
        e = np.zeros(v.size)
        e[k] = 1.0
        assert np.sum((p - v) ** 2) <= np.sum((e - v) ** 2) + 1e-6 * (1 + np.sum(v * v))


@given(finite, st.floats(0, 1e3))
def test_soft_threshold_properties(a, nu):
    s = soft_threshold(a, nu)
    assert abs(s) <= abs(a) and (s == 0 or np.sign(s) == np.sign(a))
    assert soft_threshold(-a, nu) == -s
    assert abs(abs(a) - abs(s)) <= nu + 1e-9


@given(weights_and_membership(), st.floats(-5, 5), st.floats(0.01, 10))
def test_regularizer_homogeneity(wu, c, lam):
    W, U = wu
    base = regularizer(W, U, lam)
    assert base >= 0
    np.testing.assert_allclose(regularizer(c * W, U, lam), c * c * base, rtol=1e-9, atol=1e-9)
    np.testing.assert_allclose(regularizer(W, U, 2 * lam), 2 * base, rtol=1e-12, atol=1e-12)


@given(weights_and_membership(), st.randoms(use_true_random=False))
def test_regularizer_task_permutation(wu, rnd):
    W, U = wu
    perm = list(range(W.shape[1]))
    rnd.shuffle(perm)
    np.testing.assert_allclose(regularizer(W[:, perm], U[:, perm], 1.0), regularizer(W, U, 1.0), rtol=1e-10)


@given(weights_and_membership(), st.floats(0, 10))
def test_fusion_nonnegative_and_zero_when_identical(wu, mu):
    _, U = wu
    assert fusion_penalty(U, mu) >= 0
    same = np.repeat(U[:, :1], U.shape[1], axis=1)
    assert fusion_penalty(same, mu) == 0.0


@given(st.lists(st.integers(0, 3), min_size=2, max_size=12), st.permutations([0, 1, 2, 3]))
def test_ari_invariant_to_relabeling(labels, perm):
    a = np.array(labels)
    assume(len(set(labels)) > 1)
    relabeled = np.array([perm[x] for x in labels])
    ari, acc = group_recovery(relabeled, a)
    assert abs(ari - 1.0) < 1e-12 and acc == 1.0


@given(st.lists(st.integers(0, 4), min_size=1, max_size=10))
def test_hard_assignment_of_one_hot(labels):
    n = max(labels) + 1
    assert np.array_equal(hard_assignment(one_hot_membership(labels, n)), labels)


@st.composite
def merge_instance(draw):
    W, _ = _weights_and_membership(draw, m_max=5)
    m = W.shape[1]
    assume(m >= 2)
    groups = np.array(draw(st.lists(st.integers(0, 2), min_size=m, max_size=m)))
    s, t = draw(st.integers(0, m - 1)), draw(st.integers(0, m - 1))
    assume(groups[s] != groups[t])
    return W, groups, (s, t)


@given(merge_instance(), st.floats(0.01, 10))
def test_merge_decrease_formula_matches_penalty_difference(inst, lam):
    W, groups, pair = inst
    wit = check_merge_proposition(W, groups, pair, lam)
    assert wit.decrease >= 0
    np.testing.assert_allclose(wit.before - wit.after, wit.decrease, rtol=1e-8, atol=1e-8 * (1 + wit.before))
    if wit.precondition_met:
        assert wit.holds


@st.composite
def split_instance(draw):
    W, _ = _weights_and_membership(draw, m_max=5)
    m = W.shape[1]
    assume(m >= 2)
    groups = np.array(draw(st.lists(st.integers(0, 1), min_size=m, max_size=m)))
    s, t = draw(st.integers(0, m - 1)), draw(st.integers(0, m - 1))
    assume(s != t and groups[s] == groups[t])
    return W, groups, (s, t)


@given(split_instance(), st.floats(0.01, 10))
def test_split_decrease_formula_matches_penalty_difference(inst, lam):
    W, groups, pair = inst
    wit = check_split_proposition(W, groups, pair, lam)
    assert wit.decrease >= 0
    np.testing.assert_allclose(wit.before - wit.after, wit.decrease, rtol=1e-8, atol=1e-8 * (1 + wit.before))
    if wit.precondition_met:
        assert wit.holds


@given(st.floats(0.1, 10), st.integers(1, 10 ** 4), st.integers(1, 500), st.integers(1, 50))
def test_rademacher_bound_monotone(x, n, d, m):
    b = rademacher_bound(x, n, d, m, [1.0])
    assert b > 0
    assert rademacher_bound(x, n, d + 1, m, [1.0]) > b
    assert rademacher_bound(2 * x, n, d, m, [1.0]) == 2 * b
    if n * d >= 2:  # log(2nd)/n decreases in n once 2nd >= e
        assert rademacher_bound(x, n + 1, d, m, [1.0]) < b
