"""Losses, the squared group-sparsity regularizer and the fusion penalty."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from sgmtl.core import LOGISTIC, SQUARED, Problem, SolverConfig, TaskDataset
from sgmtl.errors import NonFinite


@dataclass(frozen=True)
class ObjectiveBreakdown:
    loss: float
    regularizer: float
    fusion: float
    total: float


def softplus(a):
    """Numerically stable ``log(1 + exp(a))``."""
    a = np.asarray(a, dtype=float)
    return np.maximum(a, 0.0) + np.log1p(np.exp(-np.abs(a)))


def task_loss(dataset: TaskDataset, w) -> float:
    """Mean loss of one task.

    Squared loss is ``sum((y - Xw)**2) / (2 n)``; logistic loss is
    ``sum(log(1 + exp(-y * Xw))) / n``.
    """
    y = dataset.targets
    # overflow surfaces as NonFinite below
    with np.errstate(over="ignore", invalid="ignore"):
        z = dataset.features @ np.asarray(w, dtype=float)
        if dataset.loss_kind == SQUARED:
            value = 0.5 * np.mean((y - z) ** 2)
        elif dataset.loss_kind == LOGISTIC:
            value = np.mean(softplus(-y * z))
        else:  # pragma: no cover - guarded by TaskDataset
            raise ValueError(dataset.loss_kind)
    if not np.isfinite(value):
        raise NonFinite(f"task loss is not finite ({value})")
    return float(value)


def task_loss_gradient(dataset: TaskDataset, w) -> np.ndarray:
    X, y = dataset.features, dataset.targets
    z = X @ np.asarray(w, dtype=float)
    if dataset.loss_kind == SQUARED:
        return X.T @ (z - y) / dataset.n
    # d/dz softplus(-y z) = -y * sigmoid(-y z)
    s = -y * np.exp(-softplus(y * z))
    return X.T @ s / dataset.n


def group_row_norms(weights, membership) -> np.ndarray:
    """``(N, d)`` matrix of ``sqrt(sum_t u[g, t] * W[j, t]**2)``."""
    W = np.asarray(weights, dtype=float)
    U = np.asarray(membership, dtype=float)
    return np.sqrt(U @ (W * W).T)


def group_norm(weights, membership, g: int) -> float:
    return float(group_row_norms(weights, membership)[g].sum())


def regularizer(weights, membership, lam) -> float:
    """``sum_g lam[g] * group_norm(g)**2``."""
    sums = group_row_norms(weights, membership).sum(axis=1)
    lam = np.broadcast_to(np.asarray(lam, dtype=float), sums.shape)
    return float(np.dot(lam, sums * sums))


def fusion_penalty(membership, mu: float) -> float:
    """``mu * sum_{t < t'} ||U[:, t] - U[:, t']||**2``.

    Evaluated pairwise so identical columns give exactly zero.
    """
    if mu == 0:
        return 0.0
    U = np.asarray(membership, dtype=float)
    diff = U[:, :, None] - U[:, None, :]
    return float(mu * 0.5 * np.sum(diff * diff))


def total_objective(problem: Problem, weights, membership, config: SolverConfig) -> ObjectiveBreakdown:
    W = np.asarray(weights, dtype=float)
    loss = sum(task_loss(task, W[:, t]) for t, task in enumerate(problem.tasks))
    reg = regularizer(W, membership, config.lambdas)
    fus = fusion_penalty(membership, config.mu)
    total = loss + reg + fus
    if not np.isfinite(total):
        raise NonFinite(f"objective is not finite ({total})")
    return ObjectiveBreakdown(float(loss), reg, fus, float(total))
