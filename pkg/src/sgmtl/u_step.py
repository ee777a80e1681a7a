"""Membership update: projected gradient descent with random restarts."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from sgmtl.core import Problem, SolverConfig, random_membership
from sgmtl.objective import fusion_penalty, regularizer

_MAX_HALVINGS = 30
_DECREASE_SLACK = 1e-12
# Mild growth keeps iterates near the gradient flow; doubling snaps columns to
# whichever vertex the random start happens to favour.
_STEP_GROWTH = 1.1


@dataclass(frozen=True)
class UStepReport:
    final_membership: np.ndarray
    objective_before: float
    objective_after: float
    iterations: int
    restart_index_chosen: int


def grad_regularizer_u(weights, membership, lam, epsilon_denom: float = 1e-10) -> np.ndarray:
    """Gradient of the squared group regularizer with respect to ``U``.

    Entry ``(g, t)`` is ``lam[g] * A_g * sum_j W[j, t]**2 / r[g, j]`` where
    ``r[g, j] = sqrt(sum_t u[g, t] W[j, t]**2)`` and ``A_g = sum_j r[g, j]``.
    Row norms are clamped below by ``epsilon_denom``.
    """
    W2 = np.asarray(weights, dtype=float) ** 2
    U = np.asarray(membership, dtype=float)
    r = np.sqrt(U @ W2.T)
    A = r.sum(axis=1)
    lam = np.broadcast_to(np.asarray(lam, dtype=float), A.shape)
    inv = 1.0 / np.maximum(r, epsilon_denom)
    return (lam * A)[:, None] * (inv @ W2)


def grad_fusion_u(membership, mu: float) -> np.ndarray:
    U = np.asarray(membership, dtype=float)
    if mu == 0:
        return np.zeros_like(U)
    m = U.shape[1]
    return 2.0 * mu * (m * U - U.sum(axis=1, keepdims=True))


def project_column_simplex(v) -> np.ndarray:
    """Euclidean projection of ``v`` onto the probability simplex.

    Sort-and-threshold: with ``s`` sorted decreasingly, the threshold is
    ``(cumsum(s)[k] - 1) / (k + 1)`` for the largest ``k`` with
    ``s[k]`` above it.
    """
    v = np.asarray(v, dtype=float)
    return project_columns_simplex(v[:, None])[:, 0]


def project_columns_simplex(V) -> np.ndarray:
    """Project every column of ``V`` onto the simplex independently."""
    V = np.asarray(V, dtype=float)
    n = V.shape[0]
    if n == 1:
        return np.ones_like(V)
    s = -np.sort(-V, axis=0)
    css = np.cumsum(s, axis=0) - 1.0
    k = np.arange(1, n + 1)[:, None]
    cond = s - css / k > 0
    rho = n - 1 - np.argmax(cond[::-1], axis=0)
    theta = css[rho, np.arange(V.shape[1])] / (rho + 1)
    P = np.maximum(V - theta, 0.0)
    # renormalize away rounding so columns sum to 1 to machine precision
    return P / P.sum(axis=0, keepdims=True)


def _objective(W, U, lam, mu):
    return regularizer(W, U, lam) + fusion_penalty(U, mu)


def _gradient(W, U, lam, mu, eps):
    return grad_regularizer_u(W, U, lam, eps) + grad_fusion_u(U, mu)


def _projected_descent(W, U, lam, mu, config):
    """Monotone projected gradient descent from ``U``; returns (U, F, iters).

    The first trial step is ``u_step_size / max|G|``, so ``u_step_size`` is
    the largest entry change the first iteration may make.
    """
    F = _objective(W, U, lam, mu)
    eta = None
    it = 0
    for it in range(1, config.max_u_iters + 1):
        G = _gradient(W, U, lam, mu, config.epsilon_denom)
        if eta is None:
            gmax = np.abs(G).max()
            if gmax == 0:
                return U, F, 0
            eta = config.u_step_size / gmax
        accepted = False
        for _ in range(_MAX_HALVINGS):
            U_new = project_columns_simplex(U - eta * G)
            step = U_new - U
            if not np.any(step):
                break
            F_new = _objective(W, U_new, lam, mu)
            model = F + np.sum(G * step) + np.sum(step * step) / (2 * eta)
            if F_new <= F and F_new <= model + _DECREASE_SLACK:
                accepted = True
                break
            eta *= 0.5
        if not accepted:
            return U, F, it - 1
        change = F - F_new
        U, F = U_new, F_new
        eta *= _STEP_GROWTH
        if change <= config.tol * max(abs(F), 1e-300):
            break
    return U, F, it


def u_step(
    problem: Optional[Problem],
    weights,
    membership,
    config: SolverConfig,
    rng: Optional[np.random.Generator] = None,
) -> UStepReport:
    """Minimize regularizer + fusion over ``U`` with ``W`` fixed.

    The first restart warm-starts from ``membership``; the remaining
    ``config.u_restarts - 1`` start from random simplex columns. The best
    restart is returned, so the objective never exceeds the incoming one.
    ``problem`` is accepted for interface symmetry; the loss does not
    depend on ``U``.
    """
    if rng is None:
        rng = np.random.default_rng(config.seed)
    W = np.asarray(weights, dtype=float)
    U0 = np.array(membership, dtype=float)
    lam = config.lambdas
    mu = config.mu
    N, m = U0.shape
    F0 = _objective(W, U0, lam, mu)

    best_U, best_F, best_iters, best_r = U0, F0, 0, 0
    for r in range(config.u_restarts):
        start = U0 if r == 0 else random_membership(N, m, rng)
        U, F, iters = _projected_descent(W, start, lam, mu, config)
        if F < best_F or r == 0:
            best_U, best_F, best_iters, best_r = U, F, iters, r
    return UStepReport(best_U, F0, best_F, best_iters, best_r)
