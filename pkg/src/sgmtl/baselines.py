"""Reference methods: per-task elastic net, pooled data, multitask lasso, ClusMTL."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from sgmtl import _backend
from sgmtl.core import LOGISTIC, FitResult, Problem, TaskDataset, one_hot_membership
from sgmtl.errors import DegenerateClustering, MixedLossKinds, NoConvergence, ValidationError
from sgmtl.objective import task_loss, task_loss_gradient


@dataclass(frozen=True)
class ElasticNetConfig:
    l1: float = 0.01
    l2: float = 0.01
    max_iters: int = 100000
    tol: float = 1e-6

    def __post_init__(self):
        if self.l1 < 0 or self.l2 < 0:
            raise ValidationError("elastic-net penalties must be nonnegative")


def elastic_net_objective(dataset: TaskDataset, w, l1: float, l2: float) -> float:
    w = np.asarray(w, dtype=float)
    return task_loss(dataset, w) + l1 * np.abs(w).sum() + 0.5 * l2 * np.dot(w, w)


def kkt_residual(dataset: TaskDataset, w, l1: float, l2: float) -> float:
    """Largest violation of the elastic-net subgradient optimality conditions."""
    w = np.asarray(w, dtype=float)
    g = task_loss_gradient(dataset, w) + l2 * w
    nz = w != 0
    res = np.where(nz, np.abs(g + l1 * np.sign(w)), np.maximum(np.abs(g) - l1, 0.0))
    return float(res.max()) if res.size else 0.0


def fit_elastic_net(dataset: TaskDataset, config: ElasticNetConfig = ElasticNetConfig(),
                    w0=None, kernel=None) -> np.ndarray:
    """Coordinate-descent minimizer of ``loss + l1 ||w||_1 + l2 ||w||^2 / 2``.

    Iterates full sweeps until the KKT residual is at most ``config.tol``.
    Raises :class:`NoConvergence` if ``max_iters`` sweeps leave a residual
    above ``10 * tol``.
    """
    kernel = kernel or _backend.enet_pass
    X = dataset.features
    n, d = X.shape
    XT = np.ascontiguousarray(X.T)
    y = np.ascontiguousarray(dataset.targets)
    logistic = dataset.loss_kind == LOGISTIC
    sqnorm = np.ascontiguousarray((X * X).sum(axis=0) / max(n, 1))
    curv = sqnorm / 4.0 if logistic else sqnorm
    w = np.zeros(d) if w0 is None else np.array(w0, dtype=float)
    z = X @ w
    residual = np.inf
    for it in range(config.max_iters):
        change = kernel(XT, y, w, z, sqnorm, curv, float(config.l1), float(config.l2), logistic)
        if change < config.tol or it % 10 == 9:
            residual = kkt_residual(dataset, w, config.l1, config.l2)
            if residual <= config.tol:
                return w
    residual = kkt_residual(dataset, w, config.l1, config.l2)
    if residual > 10 * config.tol:
        raise NoConvergence(f"elastic net stopped with KKT residual {residual:.3g}")
    return w


def fit_stl(problem: Problem, config: ElasticNetConfig = ElasticNetConfig()) -> np.ndarray:
    """Independent elastic net per task; returns ``W`` of shape ``(d, m)``."""
    return np.column_stack([fit_elastic_net(task, config) for task in problem.tasks])


def pool_tasks(problem: Problem) -> TaskDataset:
    kinds = set(problem.loss_kinds)
    if len(kinds) != 1:
        raise MixedLossKinds(f"cannot pool tasks with loss kinds {sorted(kinds)}")
    X = np.vstack([task.features for task in problem.tasks])
    y = np.concatenate([task.targets for task in problem.tasks])
    return TaskDataset(X, y, kinds.pop(), "pooled")


def fit_all_tasks(problem: Problem, config: ElasticNetConfig = ElasticNetConfig()) -> np.ndarray:
    """Elastic net on the concatenation of every task's data."""
    return fit_elastic_net(pool_tasks(problem), config)


# -- multitask lasso -------------------------------------------------------

def _row_shrink(V, thresh):
    """Prox of ``thresh * sum_j ||V_j||_2``: rows scaled by ``max(0, 1 - thresh/||V_j||)``."""
    norms = np.sqrt((V * V).sum(axis=1))
    scale = np.zeros_like(norms)
    keep = norms > thresh
    scale[keep] = 1.0 - thresh / norms[keep]
    return V * scale[:, None]


def _row_shrink_squared(V, c):
    """Prox of ``c * (sum_j ||V_j||_2)**2``.

    The solution shrinks every row norm by the same amount
    ``2 c sum_j ||X_j||``; with ``k`` active rows (the largest norms) that
    amount is ``2 c S_k / (1 + 2 c k)`` where ``S_k`` is the sum of the
    ``k`` largest input norms.
    """
    norms = np.sqrt((V * V).sum(axis=1))
    order = np.sort(norms)[::-1]
    csum = np.cumsum(order)
    k = np.arange(1, order.size + 1)
    shift = 2 * c * csum / (1 + 2 * c * k)
    active = order > shift
    if not np.any(active):
        return np.zeros_like(V)
    kk = np.flatnonzero(active)[-1]
    theta = shift[kk]
    scale = np.zeros_like(norms)
    keep = norms > theta
    scale[keep] = 1.0 - theta / norms[keep]
    return V * scale[:, None]


def _multitask_parts(tasks, W):
    loss = 0.0
    grad = np.empty_like(W)
    for i, task in enumerate(tasks):
        loss += task_loss(task, W[:, i])
        grad[:, i] = task_loss_gradient(task, W[:, i])
    return loss, grad


def multitask_penalty(W, lam: float, squared: bool = False) -> float:
    s = np.sqrt((W * W).sum(axis=1)).sum()
    return float(lam * (s * s if squared else s))


def multitask_objective(problem: Problem, W, lam: float, task_subset=None, squared: bool = False) -> float:
    tasks = _subset(problem, task_subset)
    loss, _ = _multitask_parts(tasks, W)
    return loss + multitask_penalty(W, lam, squared)


def _subset(problem, task_subset):
    if task_subset is None:
        return list(problem.tasks)
    idx = list(task_subset)
    if not idx:
        raise ValidationError("task subset must be nonempty")
    return [problem.tasks[t] for t in idx]


def fit_multitask_lasso(problem: Problem, lambda_12: float, task_subset: Optional[Sequence[int]] = None,
                        squared: bool = False, max_iters: int = 20000, tol: float = 1e-7,
                        W0=None) -> np.ndarray:
    """Proximal-gradient fit of ``sum_t loss_t + lambda_12 * sum_j ||W_j||_2``.

    Uses monotone FISTA with step ``1 / L`` where ``L`` bounds the loss
    curvature of every task, so the objective never increases. With
    ``squared=True`` the penalty is ``lambda_12 * (sum_j ||W_j||_2)**2``.
    Returns ``W`` with one column per task in ``task_subset`` (all tasks by
    default).
    """
    tasks = _subset(problem, task_subset)
    d = problem.d
    L = 0.0
    for task in tasks:
        s = np.linalg.norm(task.features, 2) ** 2 / task.n
        L = max(L, s / 4.0 if task.loss_kind == LOGISTIC else s)
    L = max(L, 1e-12)
    prox = _row_shrink_squared if squared else _row_shrink

    def objective(W):
        loss, _ = _multitask_parts(tasks, W)
        return loss + multitask_penalty(W, lambda_12, squared)

    x = np.zeros((d, len(tasks))) if W0 is None else np.array(W0, dtype=float)
    fx = objective(x)
    y_ = x.copy()
    tk = 1.0
    for it in range(max_iters):
        _, g = _multitask_parts(tasks, y_)
        z = prox(y_ - g / L, lambda_12 / L)
        fz = objective(z)
        x_new, f_new = (z, fz) if fz <= fx else (x, fx)
        t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * tk * tk))
        y_ = x_new + (tk / t_new) * (z - x_new) + ((tk - 1.0) / t_new) * (x_new - x)
        x, fx, tk = x_new, f_new, t_new
        if it % 5 == 4:
            _, gx = _multitask_parts(tasks, x)
            mapping = L * (x - prox(x - gx / L, lambda_12 / L))
            if np.max(np.abs(mapping)) <= tol:
                break
    else:
        _, gx = _multitask_parts(tasks, x)
        mapping = L * (x - prox(x - gx / L, lambda_12 / L))
        if np.max(np.abs(mapping)) > 10 * tol:
            raise NoConvergence("multitask lasso did not converge")
    # rows that the prox left below 1e-12 are set exactly to zero
    x[np.sqrt((x * x).sum(axis=1)) <= 1e-12] = 0.0
    return x


# -- k-means and ClusMTL -----------------------------------------------------

def kmeans_plusplus(points, k: int, rng: np.random.Generator) -> np.ndarray:
    n = points.shape[0]
    centers = np.empty((k, points.shape[1]))
    centers[0] = points[rng.integers(n)]
    d2 = ((points - centers[0]) ** 2).sum(axis=1)
    for i in range(1, k):
        total = d2.sum()
        idx = rng.choice(n, p=d2 / total) if total > 0 else rng.integers(n)
        centers[i] = points[idx]
        d2 = np.minimum(d2, ((points - centers[i]) ** 2).sum(axis=1))
    return centers


def lloyd(points, centers, max_iter: int = 300):
    labels = None
    for _ in range(max_iter):
        dist = ((points[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        new_labels = np.argmin(dist, axis=1)
        if labels is not None and np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for c in range(centers.shape[0]):
            members = labels == c
            if np.any(members):
                centers[c] = points[members].mean(axis=0)
    return labels, centers


def kmeans(points, k: int, seed: int = 0, max_reseeds: int = 10):
    """Lloyd's algorithm with k-means++ seeding.

    Re-seeds up to ``max_reseeds`` times if a cluster ends up empty, then
    accepts the empty cluster. Returns ``(labels, centers)``.
    """
    points = np.asarray(points, dtype=float)
    if not 1 <= k <= points.shape[0]:
        raise ValidationError("need 1 <= k <= number of points")
    rng = np.random.default_rng(seed)
    for _ in range(max_reseeds + 1):
        labels, centers = lloyd(points, kmeans_plusplus(points, k, rng))
        if np.unique(labels).size == k:
            return labels, centers
    return labels, centers


def fit_clus_mtl(problem: Problem, n_clusters: int, enet_config: ElasticNetConfig = ElasticNetConfig(),
                 lambda_12: float = 0.01, seed: int = 0, strict: bool = False) -> FitResult:
    """STL per task, k-means on the weight columns, multitask lasso per cluster.

    With ``strict=True`` an empty cluster after all re-seeds raises
    :class:`DegenerateClustering` instead of being accepted.
    """
    if n_clusters > problem.m:
        raise ValidationError("n_clusters must not exceed the number of tasks")
    W_stl = fit_stl(problem, enet_config)
    labels, _ = kmeans(W_stl.T, n_clusters, seed=seed)
    if strict and np.unique(labels).size < n_clusters:
        raise DegenerateClustering("k-means left a cluster empty")
    W = np.zeros_like(W_stl)
    for c in range(n_clusters):
        members = np.flatnonzero(labels == c)
        if members.size:
            W[:, members] = fit_multitask_lasso(problem, lambda_12, members)
    return FitResult(W, one_hot_membership(labels, n_clusters), labels, [], True, 0)
