"""Uniform entry point over every fitting method, used by CV and the CLI."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from sgmtl import baselines
from sgmtl.core import Problem, SolverConfig
from sgmtl.errors import UnknownMethod, ValidationError
from sgmtl.solver import InitStrategy, fit

METHODS = ("stl", "alltasks", "single-group", "clusmtl", "sgmtl", "fusion-sgmtl")

_SOLVER_FIELDS = set(SolverConfig.__dataclass_fields__)
_INIT_FIELDS = {"stl_l1", "stl_l2"}
_SG_FIELDS = (_SOLVER_FIELDS - {"mu"}) | _INIT_FIELDS | {"lambda"}

# hyperparameters each method accepts
METHOD_PARAMS = {
    "stl": frozenset({"l1", "l2"}),
    "alltasks": frozenset({"l1", "l2"}),
    "single-group": frozenset({"lambda_12"}),
    "clusmtl": frozenset({"n_groups", "l1", "l2", "lambda_12", "seed"}),
    "sgmtl": frozenset(_SG_FIELDS),
    "fusion-sgmtl": frozenset(_SG_FIELDS | {"mu"}),
}


@dataclass(frozen=True)
class MethodSpec:
    """A method name plus its hyperparameters.

    Recognized parameters: ``l1``, ``l2`` (stl, alltasks, clusmtl),
    ``lambda_12`` (single-group, clusmtl), ``n_groups`` (clusmtl and the
    SG-MTL variants), every :class:`SolverConfig` field and ``stl_l1``,
    ``stl_l2`` (SG-MTL variants).
    """

    name: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.name not in METHODS:
            raise UnknownMethod(f"unknown method {self.name!r}; choose from {', '.join(METHODS)}")
        extra = set(self.params) - METHOD_PARAMS[self.name]
        if extra:
            raise ValidationError(f"method {self.name!r} does not take {sorted(extra)}")

    def with_params(self, **params) -> "MethodSpec":
        return replace(self, params={**self.params, **params})


@dataclass
class MethodFit:
    weights: np.ndarray
    membership: Optional[np.ndarray] = None
    hard_groups: Optional[np.ndarray] = None
    objective_trace: list = field(default_factory=list)
    converged: bool = True
    iterations: int = 0


def solver_config(params: dict, fusion: bool) -> SolverConfig:
    kwargs = {k: v for k, v in params.items() if k in _SOLVER_FIELDS}
    if "lambda" in params:
        kwargs["lam"] = params["lambda"]
    if not fusion:
        kwargs["mu"] = 0.0
    return SolverConfig(**kwargs)


def fit_method(spec: MethodSpec, problem: Problem) -> MethodFit:
    p = spec.params
    enet = baselines.ElasticNetConfig(l1=p.get("l1", 0.01), l2=p.get("l2", 0.01))
    if spec.name == "stl":
        return MethodFit(baselines.fit_stl(problem, enet))
    if spec.name == "alltasks":
        w = baselines.fit_all_tasks(problem, enet)
        return MethodFit(np.repeat(w[:, None], problem.m, axis=1))
    if spec.name == "single-group":
        W = baselines.fit_multitask_lasso(problem, p.get("lambda_12", 0.01))
        return MethodFit(W, np.ones((1, problem.m)), np.zeros(problem.m, dtype=int))
    if spec.name == "clusmtl":
        res = baselines.fit_clus_mtl(problem, p.get("n_groups", 2), enet, p.get("lambda_12", 0.01),
                                     seed=p.get("seed", 0))
        return MethodFit(res.weights, res.membership, res.hard_groups)
    config = solver_config(p, fusion=spec.name == "fusion-sgmtl")
    init = InitStrategy(**{k: p[k] for k in _INIT_FIELDS if k in p})
    res = fit(problem, config, init)
    return MethodFit(res.weights, res.membership, res.hard_groups, res.objective_trace,
                     res.converged, res.iterations)
