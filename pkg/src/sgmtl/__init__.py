"""Sparsity-grouped multitask learning.

Jointly estimates sparse per-task linear models and a soft clustering of the
tasks into groups whose members share a sparsity pattern.
"""

from sgmtl.core import (
    FitResult,
    Problem,
    SolverConfig,
    TaskDataset,
    hard_assignment,
    validate_problem,
)
from sgmtl.solver import InitStrategy, fit, initialize, predict
from sgmtl._backend import BACKEND

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "FitResult",
    "InitStrategy",
    "Problem",
    "SolverConfig",
    "TaskDataset",
    "fit",
    "hard_assignment",
    "initialize",
    "predict",
    "validate_problem",
]
