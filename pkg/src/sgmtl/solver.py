"""Alternating minimization over memberships U and weights W."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from sgmtl.baselines import ElasticNetConfig, fit_stl
from sgmtl.core import (
    LOGISTIC,
    FitResult,
    Problem,
    SolverConfig,
    TaskDataset,
    hard_assignment,
    random_membership,
    validate_problem,
)
from sgmtl.errors import DimensionMismatch, NonFinite, ValidationError
from sgmtl.objective import total_objective
from sgmtl.u_step import u_step
from sgmtl.w_step import PackedProblem, w_step

log = logging.getLogger(__name__)

TRACE_SLACK = 1e-9


@dataclass(frozen=True)
class InitStrategy:
    """How ``W`` is initialized; ``U`` always starts from random simplex columns.

    ``kind`` is ``"stl_warm_start"`` (per-task elastic net with penalties
    ``stl_l1``/``stl_l2``), ``"zeros"`` or ``"given"`` (uses ``weights``).
    """

    kind: str = "stl_warm_start"
    stl_l1: float = 0.05
    stl_l2: float = 0.01
    weights: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.kind not in ("stl_warm_start", "zeros", "given"):
            raise ValidationError(f"unknown init strategy {self.kind!r}")
        if self.stl_l1 < 0 or self.stl_l2 < 0:
            raise ValidationError("STL penalties must be nonnegative")
        if self.kind == "given" and self.weights is None:
            raise ValidationError("init strategy 'given' needs weights")


def initialize(problem: Problem, config: SolverConfig, strategy: InitStrategy = InitStrategy(),
               rng: Optional[np.random.Generator] = None):
    """Return starting ``(W, U)``."""
    if rng is None:
        rng = np.random.default_rng(config.seed)
    d, m = problem.d, problem.m
    if strategy.kind == "stl_warm_start":
        W = fit_stl(problem, ElasticNetConfig(l1=strategy.stl_l1, l2=strategy.stl_l2))
    elif strategy.kind == "zeros":
        W = np.zeros((d, m))
    else:
        W = np.array(strategy.weights, dtype=float)
        if W.shape != (d, m):
            raise DimensionMismatch(f"given weights have shape {W.shape}, expected {(d, m)}")
    U = random_membership(config.n_groups, m, rng)
    return np.ascontiguousarray(W), U


def fit(problem: Problem, config: SolverConfig, strategy: InitStrategy = InitStrategy()) -> FitResult:
    """Alternate a U-step and a W-step until the objective stalls.

    The total objective is recorded at the start and after every half-step.
    Iteration stops once one outer iteration changes it by less than
    ``config.tol`` relative, or after ``config.max_outer`` iterations.
    """
    validate_problem(problem)
    rng = np.random.default_rng(config.seed)
    W, U = initialize(problem, config, strategy, rng)
    packed = PackedProblem(problem)

    obj = total_objective(problem, W, U, config).total
    trace = [obj]
    converged = False
    it = 0
    for it in range(1, config.max_outer + 1):
        start = obj
        report = u_step(problem, W, U, config, rng=rng)
        U = report.final_membership
        obj = _record(problem, W, U, config, trace)
        W, _, _ = w_step(problem, W, U, config, packed=packed)
        obj = _record(problem, W, U, config, trace)
        if abs(start - obj) <= config.tol * max(abs(start), 1e-300):
            converged = True
            break
    log.debug("fit finished after %d outer iterations, objective %.6g", it, obj)
    return FitResult(W, U, hard_assignment(U), trace, converged, it)


def _record(problem, W, U, config, trace):
    obj = total_objective(problem, W, U, config).total
    if not np.isfinite(obj):
        raise NonFinite("objective became non-finite")
    if obj > trace[-1] + TRACE_SLACK * max(1.0, abs(trace[-1])):
        log.warning("objective increased from %.12g to %.12g", trace[-1], obj)
    trace.append(obj)
    return obj


def predict(weights, dataset: TaskDataset, t: int):
    """Scores ``X @ W[:, t]``; for logistic tasks returns ``(labels, scores)``."""
    W = np.asarray(weights, dtype=float)
    if W.ndim == 1:
        W = W[:, None]
    if not 0 <= t < W.shape[1]:
        raise DimensionMismatch(f"task index {t} out of range for {W.shape[1]} tasks")
    if dataset.d != W.shape[0]:
        raise DimensionMismatch(f"dataset has d={dataset.d}, weights have d={W.shape[0]}")
    scores = dataset.features @ W[:, t]
    if dataset.loss_kind == LOGISTIC:
        return np.where(scores >= 0, 1.0, -1.0), scores
    return scores
