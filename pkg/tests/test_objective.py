import math

import numpy as np
import pytest

from sgmtl.core import Problem, SolverConfig, TaskDataset, random_membership
from sgmtl.errors import NonFinite
from sgmtl.objective import (
    fusion_penalty,
    group_norm,
    regularizer,
    softplus,
    task_loss,
    task_loss_gradient,
    total_objective,
)


def _brute_group_norm(W, U, g):
    total = 0.0
    for j in range(W.shape[0]):
        total += math.sqrt(sum(U[g, t] * W[j, t] ** 2 for t in range(W.shape[1])))
    return total


def _brute_fusion(U, mu):
    m = U.shape[1]
    return mu * sum(float(np.sum((U[:, a] - U[:, b]) ** 2)) for a in range(m) for b in range(a + 1, m))


def test_squared_loss_examples():
    X = np.array([[1.0, 2.0], [3.0, -1.0]])
    w = np.array([0.5, -0.25])
    assert task_loss(TaskDataset(X, X @ w), w) == 0.0
    assert task_loss(TaskDataset(np.zeros((2, 1)), np.array([1.0, -1.0])), np.zeros(1)) == pytest.approx(0.5)


def test_logistic_loss_at_zero_is_log2():
    task = TaskDataset(np.ones((3, 2)), np.array([1.0, -1.0, 1.0]), "logistic")
    assert task_loss(task, np.zeros(2)) == pytest.approx(0.6931471805599453, abs=1e-15)


def test_logistic_loss_is_stable_for_large_margins():
    task = TaskDataset(np.array([[1.0], [1.0]]), np.array([1.0, -1.0]), "logistic")
    # per-example losses: softplus(-800) ~ 0 and softplus(800) = 800
    assert task_loss(task, np.array([800.0])) == pytest.approx(400.0)
    assert softplus(np.array([-800.0]))[0] == 0.0


def test_task_loss_nonfinite_raises():
    task = TaskDataset(np.ones((1, 1)), np.ones(1))
    with pytest.raises(NonFinite):
        task_loss(task, np.array([1e300]))


@pytest.mark.parametrize("kind", ["squared", "logistic"])
def test_loss_gradient_matches_central_differences(kind, rng):
    X = rng.standard_normal((7, 4))
    y = np.sign(rng.standard_normal(7)) if kind == "logistic" else rng.standard_normal(7)
    task = TaskDataset(X, y, kind)
    w = rng.standard_normal(4)
    h = 1e-6
    fd = np.array([(task_loss(task, w + h * e) - task_loss(task, w - h * e)) / (2 * h) for e in np.eye(4)])
    np.testing.assert_allclose(task_loss_gradient(task, w), fd, rtol=1e-6, atol=1e-9)


def test_group_norm_examples():
    U1 = np.ones((1, 2))
    assert group_norm(np.zeros((3, 2)), U1, 0) == 0.0
    assert group_norm(np.eye(2), U1, 0) == pytest.approx(2.0)
    W = np.array([[3.0, 1.0], [4.0, 5.0]])
    U = np.array([[1.0, 0.0], [0.0, 1.0]])
    assert group_norm(W, U, 0) == pytest.approx(7.0)


def test_group_norm_matches_loop(rng):
    W = rng.standard_normal((5, 4))
    U = random_membership(3, 4, rng)
    for g in range(3):
        assert group_norm(W, U, g) == pytest.approx(_brute_group_norm(W, U, g), rel=1e-13)


def test_regularizer_examples(rng):
    assert regularizer(np.zeros((2, 2)), np.ones((1, 2)), 1.0) == 0.0
    assert regularizer(np.eye(2), np.ones((1, 2)), 1.0) == pytest.approx(4.0)
    W = rng.standard_normal((4, 3))
    U = random_membership(2, 3, rng)
    assert regularizer(W, U, [0.6, 1.4]) * 2 == pytest.approx(regularizer(W, U, [1.2, 2.8]))


def test_regularizer_homogeneous_degree_two(rng):
    W = rng.standard_normal((4, 5))
    U = random_membership(3, 5, rng)
    assert regularizer(3.0 * W, U, 0.7) == pytest.approx(9.0 * regularizer(W, U, 0.7), rel=1e-12)


def test_empty_group_contributes_nothing(rng):
    W = rng.standard_normal((4, 5))
    U = random_membership(2, 5, rng)
    padded = np.vstack([U, np.zeros((1, 5))])
    assert regularizer(W, padded, [0.3, 0.5, 9.0]) == pytest.approx(regularizer(W, U, [0.3, 0.5]), rel=1e-14)


def test_group_norm_task_permutation_invariance(rng):
    W = rng.standard_normal((4, 6))
    U = random_membership(3, 6, rng)
    perm = rng.permutation(6)
    for g in range(3):
        assert group_norm(W[:, perm], U[:, perm], g) == pytest.approx(group_norm(W, U, g), rel=1e-13)


def test_fusion_examples(rng):
    U = random_membership(3, 1, rng)
    assert fusion_penalty(np.repeat(U, 4, axis=1), 2.0) == 0.0
    assert fusion_penalty(np.array([[1.0, 0.0], [0.0, 1.0]]), 1.0) == pytest.approx(2.0)
    assert fusion_penalty(random_membership(3, 5, rng), 0.0) == 0.0


def test_fusion_matches_pair_loop_and_row_permutation(rng):
    U = random_membership(4, 7, rng)
    assert fusion_penalty(U, 0.3) == pytest.approx(_brute_fusion(U, 0.3), rel=1e-12)
    assert fusion_penalty(U[rng.permutation(4)], 0.3) == pytest.approx(fusion_penalty(U, 0.3), rel=1e-12)


def test_total_objective_breakdown(rng):
    tasks = tuple(TaskDataset(rng.standard_normal((6, 3)), rng.standard_normal(6)) for _ in range(4))
    problem = Problem(tasks)
    cfg = SolverConfig(n_groups=2, lam=0.4, mu=0.2)
    W = rng.standard_normal((3, 4))
    U = random_membership(2, 4, rng)
    b = total_objective(problem, W, U, cfg)
    assert b.total == pytest.approx(b.loss + b.regularizer + b.fusion, rel=1e-12)
    assert b.total >= 0
    assert b.loss == pytest.approx(sum(task_loss(t, W[:, i]) for i, t in enumerate(tasks)))
    zero = total_objective(problem, np.zeros((3, 4)), U, SolverConfig(n_groups=2, lam=0.4))
    assert zero.total == pytest.approx(sum(task_loss(t, np.zeros(3)) for t in tasks))
