"""Data model: task datasets, problems, solver configuration and results.

Weight matrices and memberships are plain ``float64`` arrays:

* weights ``W`` has shape ``(d, m)``; column ``t`` is task ``t``'s parameter
  vector and row ``j`` collects feature ``j`` across tasks.
* membership ``U`` has shape ``(N, m)``; entry ``(g, t)`` is the soft
  assignment of task ``t`` to group ``g`` and every column lies on the
  probability simplex.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from sgmtl.errors import BadLabels, DimensionMismatch, EmptyProblem, ValidationError

SQUARED = "squared"
LOGISTIC = "logistic"
LOSS_KINDS = (SQUARED, LOGISTIC)

SIMPLEX_TOL = 1e-9


def _frozen(a, ndim):
    a = np.array(a, dtype=np.float64)
    if a.ndim != ndim:
        raise DimensionMismatch(f"expected a {ndim}-d array, got shape {a.shape}")
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class TaskDataset:
    features: np.ndarray
    targets: np.ndarray
    loss_kind: str = SQUARED
    task_id: str = ""

    def __post_init__(self):
        object.__setattr__(self, "features", _frozen(self.features, 2))
        object.__setattr__(self, "targets", _frozen(self.targets, 1))
        if self.loss_kind not in LOSS_KINDS:
            raise ValidationError(f"unknown loss kind {self.loss_kind!r}")

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    def subset(self, rows) -> "TaskDataset":
        return TaskDataset(self.features[rows], self.targets[rows], self.loss_kind, self.task_id)


@dataclass(frozen=True, eq=False)
class Problem:
    tasks: tuple

    def __post_init__(self):
        object.__setattr__(self, "tasks", tuple(self.tasks))

    @property
    def m(self) -> int:
        return len(self.tasks)

    @property
    def d(self) -> int:
        return self.tasks[0].d

    def __len__(self):
        return len(self.tasks)

    def __iter__(self):
        return iter(self.tasks)

    def __getitem__(self, t):
        return self.tasks[t]

    @property
    def loss_kinds(self) -> tuple:
        return tuple(task.loss_kind for task in self.tasks)


def validate_problem(problem: Problem) -> None:
    """Raise if any task violates the dataset invariants.

    Checks that there is at least one task, that every task has as many
    targets as feature rows, that all tasks share the feature dimension and
    that classification targets are exactly -1/+1. Returns ``None`` on
    success.
    """
    if problem.m == 0:
        raise EmptyProblem("problem has no tasks")
    d = problem.tasks[0].d
    for t, task in enumerate(problem.tasks):
        if task.features.shape[0] != task.targets.shape[0]:
            raise DimensionMismatch(
                f"task {t}: {task.features.shape[0]} feature rows but "
                f"{task.targets.shape[0]} targets"
            )
        if task.d != d:
            raise DimensionMismatch(f"task {t} has d={task.d}, task 0 has d={d}")
        if not (np.all(np.isfinite(task.features)) and np.all(np.isfinite(task.targets))):
            raise ValidationError(f"task {t} contains non-finite values")
        if task.loss_kind == LOGISTIC and not np.all(np.isin(task.targets, (-1.0, 1.0))):
            raise BadLabels(f"task {t}: logistic targets must be -1 or +1")


def hard_assignment(membership: np.ndarray) -> np.ndarray:
    """Index of the largest entry of each membership column.

    ``np.argmax`` returns the first maximal index, so ties go to the
    smallest group index.
    """
    return np.argmax(np.asarray(membership), axis=0)


def check_membership(membership: np.ndarray, tol: float = SIMPLEX_TOL) -> None:
    U = np.asarray(membership)
    if U.ndim != 2:
        raise DimensionMismatch("membership must be an (N, m) matrix")
    if np.any(U < -tol) or np.any(U > 1 + tol):
        raise ValidationError("membership entries must lie in [0, 1]")
    if np.max(np.abs(U.sum(axis=0) - 1.0)) > tol:
        raise ValidationError("membership columns must sum to 1")


def random_membership(n_groups: int, m: int, rng: np.random.Generator) -> np.ndarray:
    """Columns drawn uniformly from the probability simplex."""
    if n_groups == 1:
        return np.ones((1, m))
    return rng.dirichlet(np.ones(n_groups), size=m).T.copy()


def one_hot_membership(labels, n_groups: int) -> np.ndarray:
    labels = np.asarray(labels, dtype=int)
    U = np.zeros((n_groups, labels.size))
    U[labels, np.arange(labels.size)] = 1.0
    return U


@dataclass(frozen=True)
class SolverConfig:
    """Hyperparameters for the alternating minimization solver.

    ``lam`` is either a single value shared by every group or one value per
    group. ``w_step_size`` scales the per-coordinate step, which starts at
    ``w_step_size`` divided by the coordinate's curvature bound.
    """

    n_groups: int = 1
    lam: Union[float, Sequence[float]] = 0.01
    mu: float = 0.0
    u_step_size: float = 1.0
    w_step_size: float = 1.0
    epsilon_denom: float = 1e-10
    max_outer: int = 100
    max_u_iters: int = 50
    max_w_passes: int = 10
    tol: float = 1e-5
    u_restarts: int = 5
    seed: int = 0
    literal_coord_grad: bool = False

    def __post_init__(self):
        if self.n_groups < 1:
            raise ValidationError("n_groups must be >= 1")
        lam = np.atleast_1d(np.asarray(self.lam, dtype=float))
        if lam.size not in (1, self.n_groups):
            raise ValidationError("lam must be a scalar or have one entry per group")
        if np.any(lam < 0) or not np.all(np.isfinite(lam)):
            raise ValidationError("lam must be finite and nonnegative")
        if self.mu < 0:
            raise ValidationError("mu must be nonnegative")
        for name in ("u_step_size", "w_step_size", "epsilon_denom", "tol"):
            if not getattr(self, name) > 0:
                raise ValidationError(f"{name} must be strictly positive")
        for name in ("max_outer", "max_u_iters", "max_w_passes", "u_restarts"):
            if getattr(self, name) < 0:
                raise ValidationError(f"{name} must be nonnegative")
        if self.u_restarts < 1:
            raise ValidationError("u_restarts must be >= 1")

    @property
    def lambdas(self) -> np.ndarray:
        lam = np.atleast_1d(np.asarray(self.lam, dtype=float))
        return np.broadcast_to(lam, (self.n_groups,)).copy()


@dataclass
class FitResult:
    weights: np.ndarray
    membership: np.ndarray
    hard_groups: np.ndarray
    objective_trace: list = field(default_factory=list)
    converged: bool = False
    iterations: int = 0
