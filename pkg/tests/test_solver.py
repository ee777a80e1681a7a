import logging

import numpy as np
import pytest

from sgmtl.baselines import fit_multitask_lasso, multitask_objective
from sgmtl.core import Problem, SolverConfig, TaskDataset, check_membership
from sgmtl.datagen import make_set1, make_set2
from sgmtl.errors import DimensionMismatch, ValidationError
from sgmtl.objective import task_loss
from sgmtl.solver import InitStrategy, fit, initialize, predict
from tests.conftest import random_problem


def test_zeros_init():
    problem, _ = make_set1(0)
    W, U = initialize(problem, SolverConfig(n_groups=3), InitStrategy("zeros"), np.random.default_rng(0))
    assert np.array_equal(W, np.zeros((21, 30)))
    check_membership(U, 1e-9)


def test_init_is_deterministic():
    problem, _ = make_set1(0)
    cfg = SolverConfig(n_groups=3)
    a = initialize(problem, cfg, InitStrategy(), np.random.default_rng(4))
    b = initialize(problem, cfg, InitStrategy(), np.random.default_rng(4))
    assert all(np.array_equal(x, y) for x, y in zip(a, b))


def test_stl_warm_start_beats_zero_predictor():
    problem, _ = make_set1(0)
    W, _ = initialize(problem, SolverConfig(n_groups=3), InitStrategy(), np.random.default_rng(0))
    for t, task in enumerate(problem.tasks):
        assert np.count_nonzero(W[:, t]) <= problem.d
        assert task_loss(task, W[:, t]) < task_loss(task, np.zeros(problem.d))


def test_given_init_shape_checked():
    problem, _ = make_set1(0)
    with pytest.raises(DimensionMismatch):
        initialize(problem, SolverConfig(), InitStrategy("given", weights=np.zeros((3, 3))))
    with pytest.raises(ValidationError):
        InitStrategy("given")
    with pytest.raises(ValidationError):
        InitStrategy("random")


def test_unpenalized_fit_matches_least_squares():
    rng = np.random.default_rng(0)
    tasks = tuple(TaskDataset(rng.standard_normal((3, 3)), rng.standard_normal(3)) for _ in range(3))
    res = fit(Problem(tasks), SolverConfig(n_groups=2, lam=0.0, max_w_passes=2000, tol=1e-12))
    for t, task in enumerate(tasks):
        w_ls = np.linalg.solve(task.features, task.targets)
        np.testing.assert_allclose(res.weights[:, t], w_ls, atol=1e-6)


def test_single_group_matches_standalone_solver():
    rng = np.random.default_rng(1)
    problem = random_problem(rng, m=3, n=8, d=4)
    res = fit(problem, SolverConfig(n_groups=1, lam=0.1, tol=1e-10))
    ref = fit_multitask_lasso(problem, 0.1, squared=True, tol=1e-10)
    assert res.objective_trace[-1] == pytest.approx(multitask_objective(problem, ref, 0.1, squared=True), abs=1e-6)
    assert np.all(res.membership == 1.0)


def test_fit_trace_and_result_shape():
    problem, _ = make_set1(1)
    res = fit(problem, SolverConfig(n_groups=3, lam=1e-3))
    assert res.weights.shape == (21, 30) and res.membership.shape == (3, 30)
    assert np.array_equal(res.hard_groups, np.argmax(res.membership, axis=0))
    assert len(res.objective_trace) == 1 + 2 * res.iterations
    assert all(b <= a + 1e-9 for a, b in zip(res.objective_trace, res.objective_trace[1:]))
    assert res.converged


def test_fit_is_deterministic():
    problem, _ = make_set1(2)
    cfg = SolverConfig(n_groups=3, lam=1e-3, mu=1e-3, seed=5)
    a, b = fit(problem, cfg), fit(problem, cfg)
    assert np.array_equal(a.weights, b.weights) and np.array_equal(a.membership, b.membership)
    assert a.objective_trace == b.objective_trace


def test_huge_fusion_collapses_memberships():
    problem, _ = make_set1(0)
    res = fit(problem, SolverConfig(n_groups=3, lam=1e-3, mu=1e6))
    np.testing.assert_allclose(res.membership, res.membership[:, :1].repeat(30, axis=1), atol=1e-9)
    assert np.unique(res.hard_groups).size == 1


def test_recovers_set2_groups():
    from sgmtl.evaluation import group_recovery

    problem, truth = make_set2(0)
    res = fit(problem, SolverConfig(n_groups=5, lam=5e-4, mu=1e-2))
    assert group_recovery(res.hard_groups, truth.group_of_task)[0] >= 0.9


def test_logistic_fit_runs_and_is_monotone():
    rng = np.random.default_rng(3)
    problem = random_problem(rng, m=4, n=20, d=5, logistic=True)
    res = fit(problem, SolverConfig(n_groups=2, lam=0.01, mu=0.01))
    assert all(b <= a + 1e-9 for a, b in zip(res.objective_trace, res.objective_trace[1:]))


def test_trace_increase_is_logged(monkeypatch, caplog):
    from sgmtl import solver as solver_mod

    real = solver_mod.total_objective
    calls = {"n": 0}

    class Bumped:
        def __init__(self, total):
            self.total = total

    def bumped(*args, **kwargs):
        calls["n"] += 1
        return Bumped(real(*args, **kwargs).total + 1e3 * calls["n"])

    monkeypatch.setattr(solver_mod, "total_objective", bumped)
    problem, _ = make_set1(0)
    with caplog.at_level(logging.WARNING, logger="sgmtl.solver"):
        fit(problem, SolverConfig(n_groups=3, max_outer=1))
    assert "objective increased" in caplog.text


def test_predict_examples():
    task = TaskDataset(np.eye(2), np.zeros(2))
    np.testing.assert_array_equal(predict(np.zeros((2, 1)), task, 0), [0.0, 0.0])
    np.testing.assert_array_equal(predict(np.array([[1.0], [2.0]]), task, 0), [1.0, 2.0])
    W = np.array([[0.3, -1.0], [0.7, 2.0]])
    np.testing.assert_allclose(predict(2 * W, task, 1), 2 * predict(W, task, 1))
    ltask = TaskDataset(np.eye(2), np.array([1.0, -1.0]), "logistic")
    labels, scores = predict(np.array([[0.5], [-0.5]]), ltask, 0)
    np.testing.assert_array_equal(labels, [1.0, -1.0])
    np.testing.assert_array_equal(scores, [0.5, -0.5])
    with pytest.raises(DimensionMismatch):
        predict(W, task, 2)
    with pytest.raises(DimensionMismatch):
        predict(np.zeros((3, 1)), task, 0)
