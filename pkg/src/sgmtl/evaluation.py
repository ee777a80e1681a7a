"""Metrics, cross-validation, group recovery and diagnostic checks."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment
from sklearn.metrics import adjusted_rand_score, average_precision_score

from sgmtl.core import LOGISTIC, Problem
from sgmtl.datagen import make_custom
from sgmtl.errors import DegenerateTargets, DimensionMismatch, NoPositives, PreconditionViolated, TooFewExamples
from sgmtl.methods import MethodSpec, fit_method


@dataclass
class MetricsReport:
    mse_per_task: np.ndarray
    mse_avg: float
    r2_avg: Optional[float] = None
    aucpr_avg: Optional[float] = None
    ari: Optional[float] = None
    best_perm_accuracy: Optional[float] = None


def mse_r2(predictions, targets):
    """Mean squared error and ``R^2 = 1 - SSE / SST``.

    Raises :class:`DegenerateTargets` when the targets have zero variance.
    """
    p = np.asarray(predictions, dtype=float)
    y = np.asarray(targets, dtype=float)
    if p.shape != y.shape or y.size < 2:
        raise DimensionMismatch("need equal-length inputs of length >= 2")
    sse = float(np.sum((y - p) ** 2))
    sst = float(np.sum((y - y.mean()) ** 2))
    if sst == 0:
        raise DegenerateTargets("targets have zero variance")
    return sse / y.size, 1.0 - sse / sst


def mse(predictions, targets) -> float:
    return float(np.mean((np.asarray(targets, float) - np.asarray(predictions, float)) ** 2))


def auc_pr(scores, labels) -> float:
    """Step-wise area under the precision-recall curve, ties grouped."""
    labels = np.asarray(labels)
    if not np.any(labels == 1):
        raise NoPositives("auc_pr needs at least one positive label")
    return float(average_precision_score(labels == 1, np.asarray(scores, dtype=float)))


def group_recovery(predicted, truth):
    """Adjusted Rand index and best label-permutation accuracy."""
    predicted = np.asarray(predicted)
    truth = np.asarray(truth)
    if predicted.shape != truth.shape:
        raise DimensionMismatch("label vectors differ in length")
    ari = float(adjusted_rand_score(truth, predicted))
    _, p_idx = np.unique(predicted, return_inverse=True)
    _, t_idx = np.unique(truth, return_inverse=True)
    table = np.zeros((p_idx.max() + 1, t_idx.max() + 1))
    np.add.at(table, (p_idx, t_idx), 1)
    rows, cols = linear_sum_assignment(-table)
    return ari, float(table[rows, cols].sum() / truth.size)


def support_f1(weights, true_weights) -> float:
    """F1 score of the estimated nonzero pattern against the true one."""
    est = np.asarray(weights) != 0
    true = np.asarray(true_weights) != 0
    tp = np.sum(est & true)
    if tp == 0:
        return 0.0
    precision = tp / est.sum()
    recall = tp / true.sum()
    return float(2 * precision * recall / (precision + recall))


# -- cross-validation ------------------------------------------------------------

def _map(fn, items, n_jobs):
    if n_jobs is None or n_jobs <= 1 or len(items) <= 1:
        return [fn(*item) for item in items]
    with ProcessPoolExecutor(max_workers=n_jobs) as pool:
        return list(pool.map(fn, *zip(*items)))


def kfold_indices(problem: Problem, k_folds: int, seed: int):
    """Per-task shuffled fold assignment; returns one list of index arrays per task."""
    rng = np.random.default_rng(seed)
    folds = []
    for t, task in enumerate(problem.tasks):
        if task.n < k_folds:
            raise TooFewExamples(f"task {t} has {task.n} examples, fewer than {k_folds} folds")
        folds.append(np.array_split(rng.permutation(task.n), k_folds))
    return folds


def split_problem(problem: Problem, folds, f: int):
    train, test = [], []
    for task, task_folds in zip(problem.tasks, folds):
        test_idx = np.sort(task_folds[f])
        train_idx = np.sort(np.concatenate([idx for i, idx in enumerate(task_folds) if i != f]))
        train.append(task.subset(train_idx))
        test.append(task.subset(test_idx))
    return Problem(train), test


@dataclass
class FoldResult:
    mse_per_task: np.ndarray
    r2_per_task: np.ndarray
    aucpr_per_task: np.ndarray
    hard_groups: Optional[np.ndarray] = None


def evaluate_weights(weights, tests) -> FoldResult:
    W = np.asarray(weights)
    m = len(tests)
    mses, r2s, aucs = np.full(m, np.nan), np.full(m, np.nan), np.full(m, np.nan)
    for t, test in enumerate(tests):
        scores = test.features @ W[:, t]
        mses[t] = mse(scores, test.targets)
        try:
            r2s[t] = mse_r2(scores, test.targets)[1]
        except (DegenerateTargets, DimensionMismatch):
            pass
        if test.loss_kind == LOGISTIC:
            try:
                aucs[t] = auc_pr(scores, test.targets)
            except NoPositives:
                pass
    return FoldResult(mses, r2s, aucs)


def _run_fold(problem, folds, f, method):
    train, tests = split_problem(problem, folds, f)
    result = fit_method(method, train)
    out = evaluate_weights(result.weights, tests)
    out.hard_groups = result.hard_groups
    return out


def _nanmean(a):
    a = np.asarray(a, dtype=float)
    return None if np.all(np.isnan(a)) else float(np.nanmean(a))


@dataclass
class CVReport:
    method: MethodSpec
    metrics: MetricsReport
    folds: list = field(default_factory=list)


def cross_validate(problem: Problem, method: MethodSpec, k_folds: int = 5, seed: int = 0,
                   n_jobs: int = 1) -> CVReport:
    """k-fold CV with per-task shuffled splits.

    Every fold trains ``method`` on the other ``k - 1`` folds of every task
    and scores the held-out fold; metrics are averaged over folds, then
    tasks.
    """
    folds = kfold_indices(problem, k_folds, seed)
    results = _map(_run_fold, [(problem, folds, f, method) for f in range(k_folds)], n_jobs)
    mse_per_task = np.mean([r.mse_per_task for r in results], axis=0)
    r2 = np.vstack([r.r2_per_task for r in results])
    auc = np.vstack([r.aucpr_per_task for r in results])
    metrics = MetricsReport(mse_per_task, float(mse_per_task.mean()), _nanmean(r2), _nanmean(auc))
    return CVReport(method, metrics, results)


def grid_search(problem: Problem, methods: Sequence[MethodSpec], k_folds: int = 5, seed: int = 0,
                n_jobs: int = 1):
    """Cross-validate every candidate; returns ``(reports, index_of_best)``.

    The best cell has the lowest mean MSE, or the highest mean AUC-PR when
    every task is a classification task; ties go to the earliest cell.
    """
    folds = kfold_indices(problem, k_folds, seed)
    items = [(problem, folds, f, m) for m in methods for f in range(k_folds)]
    flat = _map(_run_fold, items, n_jobs)
    reports = []
    for i, method in enumerate(methods):
        results = flat[i * k_folds:(i + 1) * k_folds]
        mse_per_task = np.mean([r.mse_per_task for r in results], axis=0)
        r2 = np.vstack([r.r2_per_task for r in results])
        auc = np.vstack([r.aucpr_per_task for r in results])
        reports.append(CVReport(method, MetricsReport(mse_per_task, float(mse_per_task.mean()),
                                                      _nanmean(r2), _nanmean(auc)), results))
    if all(kind == LOGISTIC for kind in problem.loss_kinds):
        best = int(np.argmax([r.metrics.aucpr_avg for r in reports]))
    else:
        best = int(np.argmin([r.metrics.mse_avg for r in reports]))
    return reports, best


# -- propositions ------------------------------------------------------------------

@dataclass(frozen=True)
class PropositionWitness:
    holds: bool
    precondition_met: bool
    before: float
    after: float
    decrease: float


def _group_row_norms(W, members):
    block = W[:, members]
    # scaled so tiny or huge entries neither underflow nor overflow
    scale = np.max(np.abs(block), axis=1, initial=0.0)
    safe = np.where(scale > 0, scale, 1.0)
    return scale * np.sqrt(((block / safe[:, None]) ** 2).sum(axis=1))


def _check_pair(W, groups, pair, lam):
    W = np.asarray(W, dtype=float)
    groups = np.asarray(groups)
    if W.ndim != 2 or groups.shape != (W.shape[1],):
        raise DimensionMismatch("hard groups need one label per weight column")
    if not (np.isscalar(lam) and lam > 0):
        raise PreconditionViolated("a single positive lambda shared by all groups is required")
    s, t = (int(i) for i in pair)
    if not (0 <= s < W.shape[1] and 0 <= t < W.shape[1]) or s == t:
        raise PreconditionViolated("pair must name two distinct tasks")
    return W, groups, s, t


def check_merge_proposition(weights, hard_groups, pair, lam: float = 1.0) -> PropositionWitness:
    """Merging the groups of tasks ``s`` and ``t`` lowers the unsquared penalty.

    Raises :class:`PreconditionViolated` unless the two tasks sit in
    different groups. Whether they share a feature on which both are
    nonzero is reported as ``precondition_met``; only then is a strict
    decrease promised. The decrease is accumulated row by row as
    ``A + B - sqrt(A**2 + B**2) = 2AB / (A + B + sqrt(A**2 + B**2))`` so it
    stays exact in sign.
    """
    W, groups, s, t = _check_pair(weights, hard_groups, pair, lam)
    if groups[s] == groups[t]:
        raise PreconditionViolated("tasks must be in different groups")
    shared = bool(np.any((W[:, s] != 0) & (W[:, t] != 0)))
    A = _group_row_norms(W, groups == groups[s])
    B = _group_row_norms(W, groups == groups[t])

    def penalty(labels):
        return lam * sum(_group_row_norms(W, labels == g).sum() for g in np.unique(labels))

    merged = np.where(groups == groups[t], groups[s], groups)
    hyp = np.hypot(A, B)
    both = (A > 0) & (B > 0)
    with np.errstate(invalid="ignore", divide="ignore"):
        per_row = np.where(both, 2 * A * (B / np.where(both, A + B + hyp, 1.0)), 0.0)
    decrease = float(lam * per_row.sum())
    return PropositionWitness(bool(np.any(both)), shared, penalty(groups), penalty(merged), decrease)


def _proportional(p, q, rtol=1e-12):
    cross = np.outer(p, q) - np.outer(q, p)
    return np.max(np.abs(cross), initial=0.0) <= rtol * np.linalg.norm(p) * np.linalg.norm(q)


def check_split_proposition(weights, hard_groups, pair, lam: float = 1.0) -> PropositionWitness:
    """Moving task ``t`` out of the group it shares with ``s`` lowers the
    squared penalty.

    Raises :class:`PreconditionViolated` unless ``s`` and ``t`` share a
    group. ``precondition_met`` says whether ``|W[:, t]|`` is
    non-proportional to the row norms ``P`` of the rest of that group (for
    a two-task group, to ``|W[:, s]|``); proportional columns give equality.
    With ``q = |W[:, t]|`` the decrease equals
    ``sum_{j,k} (P_j q_k - P_k q_j)**2 / (|v_j| |v_k| + v_j . v_k)`` with
    ``v_j = (P_j, q_j)``.
    """
    W, groups, s, t = _check_pair(weights, hard_groups, pair, lam)
    if groups[s] != groups[t]:
        raise PreconditionViolated("tasks must be in the same group")
    rest = groups == groups[t]
    rest[t] = False
    P = _group_row_norms(W, rest)
    q = np.abs(W[:, t])
    non_proportional = bool(np.any(P) and np.any(q) and not _proportional(P, q))

    def penalty(labels):
        return lam * sum(_group_row_norms(W, labels == g).sum() ** 2 for g in np.unique(labels))

    moved = groups.copy()
    moved[t] = groups.max() + 1
    # the decrease is degree-2 homogeneous; work in units of the largest entry
    c = max(float(np.max(P, initial=0.0)), float(np.max(q, initial=0.0))) or 1.0
    Ps, qs = P / c, q / c
    vn = np.hypot(Ps, qs)
    cross = np.outer(Ps, qs) - np.outer(qs, Ps)
    denom = np.outer(vn, vn) + np.outer(Ps, Ps) + np.outer(qs, qs)
    with np.errstate(invalid="ignore", divide="ignore"):
        terms = np.where(denom > 0, cross * cross / np.where(denom > 0, denom, 1.0), 0.0)
    decrease = float(lam * terms.sum() * c * c)
    # a term is positive exactly when its cross product is nonzero, even if its square underflows
    positive = bool(np.any((cross != 0) & (denom > 0)))
    return PropositionWitness(positive, non_proportional, penalty(groups), penalty(moved), decrease)


def rademacher_bound(x_inf_bound: float, n: int, d: int, m: int, alpha) -> float:
    """``2 X sqrt(log(2 n d) / n) * sum(alpha) / m`` (natural log)."""
    alpha = np.atleast_1d(np.asarray(alpha, dtype=float))
    return float(2.0 * x_inf_bound * math.sqrt(math.log(2.0 * n * d) / n) * alpha.sum() / m)


# -- sample-complexity sweep --------------------------------------------------------

@dataclass(frozen=True)
class SweepRow:
    n: int
    method: str
    mse: float
    ari: Optional[float]
    support_f1: float


def _sweep_cell(spec_template, n, method, seed, n_test):
    spec = replace(spec_template, n_per_task=n + n_test, seed=seed)
    problem, truth = make_custom(spec)
    train = Problem([task.subset(np.arange(n)) for task in problem.tasks])
    tests = [task.subset(np.arange(n, n + n_test)) for task in problem.tasks]
    result = fit_method(method, train)
    fold = evaluate_weights(result.weights, tests)
    ari = None
    if result.hard_groups is not None and method.name in ("sgmtl", "fusion-sgmtl", "clusmtl"):
        ari = group_recovery(result.hard_groups, truth.group_of_task)[0]
    return float(fold.mse_per_task.mean()), ari, support_f1(result.weights, truth.weights)


def sample_complexity_sweep(spec_template, n_grid: Sequence[int], methods: Sequence[MethodSpec],
                            seeds: Sequence[int], n_test: int = 100, n_jobs: int = 1):
    """Average test MSE, group ARI and support F1 for every ``(n, method)``.

    Each seed draws a fresh problem with ``n`` training and ``n_test`` test
    examples per task. Rows come out ordered by ``n`` then method.
    """
    items = [(spec_template, n, m, s, n_test) for n in n_grid for m in methods for s in seeds]
    flat = _map(_sweep_cell, items, n_jobs)
    rows = []
    k = len(seeds)
    for i, (n, m) in enumerate((n, m) for n in n_grid for m in methods):
        cells = flat[i * k:(i + 1) * k]
        aris = [c[1] for c in cells if c[1] is not None]
        rows.append(SweepRow(int(n), m.name, float(np.mean([c[0] for c in cells])),
                             float(np.mean(aris)) if aris else None,
                             float(np.mean([c[2] for c in cells]))))
    return rows
