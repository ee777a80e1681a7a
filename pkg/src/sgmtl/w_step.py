"""Weight update: coordinate descent with a proximal step per entry of W.

For a fixed entry ``w = W[j, t]`` the regularizer reduces, up to a
constant, to::

    sum_g lam_g * (u_gt * w**2 + 2 * a_g * sqrt(kappa_g + u_gt * w**2))

with ``kappa_g = sum_{t' != t} u_gt' W[j, t']**2`` and ``a_g`` the sum of the
group's row norms over the other features. Groups with ``kappa_g > 0`` are
smooth in ``w``; groups with ``kappa_g == 0`` contribute
``2 lam_g a_g sqrt(u_gt) |w|``, handled by soft-thresholding.

The functions in this module taking ``(j, t)`` evaluate these quantities
directly from ``W`` and ``U``. The full pass used by the solver lives in the
compiled kernel (or its Python fallback) selected by ``sgmtl._backend``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from sgmtl import _backend
from sgmtl.core import LOGISTIC, Problem, SolverConfig
from sgmtl.objective import softplus, total_objective

MAX_BACKTRACK = 30


@dataclass(frozen=True)
class CoordinateContext:
    kappa: np.ndarray
    g_zero: np.ndarray
    g_plus: np.ndarray
    row_factors: np.ndarray


def _row_factors_exact(W, U, j):
    """Sum over j' != j of the group row norms, without cancellation."""
    mask = np.ones(W.shape[0], dtype=bool)
    mask[j] = False
    return np.sqrt(U @ (W[mask] ** 2).T).sum(axis=1)


def coordinate_context(weights, membership, lam, j: int, t: int) -> CoordinateContext:
    W = np.asarray(weights, dtype=float)
    U = np.asarray(membership, dtype=float)
    lam = np.broadcast_to(np.asarray(lam, dtype=float), (U.shape[0],))
    w2 = W[j] ** 2
    w2[t] = 0.0
    kappa = U @ w2
    active = lam > 0
    g_zero = np.flatnonzero(active & (kappa == 0))
    g_plus = np.flatnonzero(active & (kappa > 0))
    return CoordinateContext(kappa, g_zero, g_plus, _row_factors_exact(W, U, j))


def loss_partial(task, w_col, j: int) -> float:
    X, y = task.features, task.targets
    z = X @ w_col
    if task.loss_kind == LOGISTIC:
        return float(-np.dot(y * X[:, j], np.exp(-softplus(y * z))) / task.n)
    return float(np.dot(X[:, j], z - y) / task.n)


def smooth_gradient(problem: Problem, weights, membership, lam, j: int, t: int,
                    literal: bool = False) -> float:
    """Derivative in ``W[j, t]`` of the loss plus the smooth regularizer terms.

    ``literal=True`` drops the membership factor from the quadratic term,
    reproducing the alternative printed form of this gradient.
    """
    W = np.asarray(weights, dtype=float)
    U = np.asarray(membership, dtype=float)
    lam = np.broadcast_to(np.asarray(lam, dtype=float), (U.shape[0],))
    ctx = coordinate_context(W, U, lam, j, t)
    w = W[j, t]
    u = U[:, t]
    quad = lam.sum() if literal else float(np.dot(lam, u))
    grad = loss_partial(problem.tasks[t], W[:, t], j) + 2.0 * quad * w
    for g in ctx.g_plus:
        denom = np.sqrt(ctx.kappa[g] + u[g] * w * w)
        assert denom >= np.sqrt(ctx.kappa[g]) > 0
        grad += 2.0 * lam[g] * ctx.row_factors[g] * u[g] * w / denom
    return float(grad)


def threshold_constant(weights, membership, lam, j: int, t: int) -> float:
    """Coefficient of ``|W[j, t]|`` contributed by groups with ``kappa == 0``."""
    W = np.asarray(weights, dtype=float)
    U = np.asarray(membership, dtype=float)
    lam = np.broadcast_to(np.asarray(lam, dtype=float), (U.shape[0],))
    ctx = coordinate_context(W, U, lam, j, t)
    g = ctx.g_zero
    return float(2.0 * np.sum(lam[g] * ctx.row_factors[g] * np.sqrt(U[g, t])))


def soft_threshold(a, nu):
    return np.sign(a) * np.maximum(np.abs(a) - nu, 0.0)


def coordinate_objective(problem: Problem, weights, membership, lam, j: int, t: int, value: float) -> float:
    """Task loss plus the ``W[j, t]``-dependent regularizer terms at ``value``."""
    W = np.array(weights, dtype=float)
    U = np.asarray(membership, dtype=float)
    lam = np.broadcast_to(np.asarray(lam, dtype=float), (U.shape[0],))
    ctx = coordinate_context(W, U, lam, j, t)
    W[j, t] = value
    task = problem.tasks[t]
    z = task.features @ W[:, t]
    if task.loss_kind == LOGISTIC:
        loss = np.mean(softplus(-task.targets * z))
    else:
        loss = 0.5 * np.mean((task.targets - z) ** 2)
    u = U[:, t]
    reg = np.sum(lam * (u * value ** 2 + 2.0 * ctx.row_factors * np.sqrt(ctx.kappa + u * value ** 2)))
    return float(loss + reg)


def coordinate_update(problem: Problem, weights, membership, config: SolverConfig, j: int, t: int) -> float:
    """New value of ``W[j, t]`` after one backtracked proximal step.

    Starts from ``w_step_size / curvature`` and halves until the coordinate
    objective does not increase; returns the old value if no step is
    accepted within 30 halvings.
    """
    W = np.asarray(weights, dtype=float)
    U = np.asarray(membership, dtype=float)
    lam = config.lambdas
    task = problem.tasks[t]
    w = W[j, t]
    grad = smooth_gradient(problem, W, U, lam, j, t, literal=config.literal_coord_grad)
    lbar = threshold_constant(W, U, lam, j, t)
    sq = float(np.dot(task.features[:, j], task.features[:, j]) / task.n)
    curv = sq / 4.0 if task.loss_kind == LOGISTIC else sq
    denom = curv + 2.0 * float(np.dot(lam, U[:, t]))
    eta = config.w_step_size / denom if denom > 0 else config.w_step_size

    f_old = coordinate_objective(problem, W, U, lam, j, t, w)
    # smooth part of the coordinate objective excludes the lbar * |w| term
    smooth_old = f_old - lbar * abs(w)
    for _ in range(MAX_BACKTRACK + 1):
        cand = float(soft_threshold(w - eta * grad, eta * lbar))
        delta = cand - w
        if delta == 0.0:
            return w
        f_new = coordinate_objective(problem, W, U, lam, j, t, cand)
        smooth_new = f_new - lbar * abs(cand)
        if f_new <= f_old and smooth_new - smooth_old <= grad * delta + delta * delta / (2 * eta) + 1e-12:
            return cand
        eta *= 0.5
    return w


class PackedProblem:
    """Contiguous task data laid out for the coordinate kernel."""

    def __init__(self, problem: Problem):
        d = problem.d
        sizes = [task.n for task in problem.tasks]
        self.offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)
        X = np.vstack([task.features for task in problem.tasks]) if sizes else np.zeros((0, d))
        self.XT = np.ascontiguousarray(X.T)
        self.y = np.ascontiguousarray(np.concatenate([task.targets for task in problem.tasks]))
        self.kinds = np.array([1 if task.loss_kind == LOGISTIC else 0 for task in problem.tasks], dtype=np.intc)
        n = np.maximum(np.array(sizes, dtype=float), 1.0)
        self.sqnorm = np.ascontiguousarray(
            np.array([np.sum(task.features ** 2, axis=0) for task in problem.tasks]) / n[:, None]
        )
        self.curv = np.where(self.kinds[:, None] == 1, self.sqnorm / 4.0, self.sqnorm)
        self.curv = np.ascontiguousarray(self.curv)

    def margins(self, W) -> np.ndarray:
        Z = np.empty(self.y.shape[0])
        for t in range(W.shape[1]):
            i0, i1 = self.offsets[t], self.offsets[t + 1]
            Z[i0:i1] = W[:, t] @ self.XT[:, i0:i1]
        return Z


def w_pass(packed: PackedProblem, W, U, config: SolverConfig, kernel=None) -> float:
    """One in-place coordinate sweep of ``W``; returns the largest change."""
    kernel = kernel or _backend.w_pass
    Z = packed.margins(W)
    return kernel(packed.XT, packed.y, packed.offsets, packed.kinds, packed.sqnorm, packed.curv,
                  W, np.ascontiguousarray(U, dtype=float), config.lambdas, Z,
                  float(config.w_step_size), bool(config.literal_coord_grad))


def w_step(problem: Problem, weights, membership, config: SolverConfig,
           packed: PackedProblem = None, kernel=None):
    """Coordinate-descent passes over ``W`` with ``U`` fixed.

    Runs up to ``config.max_w_passes`` sweeps (tasks outer, features inner,
    ascending) and stops early once the largest coordinate change falls
    below ``config.tol``.

    Returns
    -------
    W : ndarray
        Updated copy of ``weights``.
    passes : int
    delta : float
        Objective after minus objective before (never positive).
    """
    packed = packed or PackedProblem(problem)
    W = np.array(weights, dtype=float, order="C")
    before = total_objective(problem, W, membership, config).total
    passes = 0
    for passes in range(1, config.max_w_passes + 1):
        change = w_pass(packed, W, membership, config, kernel=kernel)
        if change < config.tol:
            break
    after = total_objective(problem, W, membership, config).total
    return W, passes, after - before
