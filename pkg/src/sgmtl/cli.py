"""Command-line interface: dataset files, experiment commands, result files.

Dataset directory layout::

    manifest.json        task list, feature count, loss kinds
    task_<id>.csv        header ``target,f0,...,f{d-1}``, one row per example
    truth.json           synthetic ground truth (optional)

Result files are JSON with matrices stored as ``{"shape": [...], "data":
[...]}`` in row-major order. Every result file carries a ``manifest``.
"""

from __future__ import annotations

import argparse
import hashlib
import itertools
import json
import logging
import math
import os
import re
import sys
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from sgmtl import __version__
from sgmtl._backend import BACKEND
from sgmtl.core import LOSS_KINDS, Problem, TaskDataset, validate_problem
from sgmtl.datagen import PRESETS, GroundTruth, SyntheticSpec, make_custom
from sgmtl.errors import DegenerateClustering, NoConvergence, NonFinite, SGMTLError, ValidationError
from sgmtl.evaluation import (
    cross_validate,
    evaluate_weights,
    grid_search,
    group_recovery,
    sample_complexity_sweep,
    support_f1,
)
from sgmtl.methods import METHOD_PARAMS, METHODS, MethodSpec, fit_method

log = logging.getLogger("sgmtl")

EXIT_OK, EXIT_SOLVER, EXIT_USAGE = 0, 1, 2
DATASET_FORMAT = "sgmtl-dataset/1"
_SOLVER_ERRORS = (NoConvergence, NonFinite, DegenerateClustering)
_ID_PATTERN = re.compile(r"^[A-Za-z0-9_.-]+$")


class UsageError(Exception):
    """Bad flags or unreadable/unwritable files; maps to exit code 2."""


# -- serialization helpers ---------------------------------------------------

def _jsonable(x):
    """Floats stay Python floats (``repr`` round-trips exactly); NaN/inf become null."""
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else None
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def matrix_to_json(a) -> dict:
    a = np.asarray(a)
    return {"shape": list(a.shape), "data": a.ravel(order="C").tolist()}


def matrix_from_json(obj) -> np.ndarray:
    return np.asarray(obj["data"], dtype=float).reshape(obj["shape"])


def write_json(path: Path, obj) -> None:
    text = json.dumps(_jsonable(obj), indent=1, allow_nan=False)
    _write_text(path, text + "\n")


def _write_text(path: Path, text: str) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    except OSError as exc:
        raise UsageError(f"cannot write {path}: {exc}") from exc


def _read_json(path: Path):
    try:
        return json.loads(path.read_text())
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path} is not valid JSON: {exc}") from exc


# -- dataset directories -------------------------------------------------------

def problem_fingerprint(problem: Problem) -> str:
    """SHA-256 over every task's loss kind, shapes and raw matrix bytes."""
    h = hashlib.sha256()
    for task in problem.tasks:
        h.update(task.loss_kind.encode())
        h.update(np.asarray(task.features.shape, dtype=np.int64).tobytes())
        h.update(np.ascontiguousarray(task.features, dtype=np.float64).tobytes())
        h.update(np.ascontiguousarray(task.targets, dtype=np.float64).tobytes())
    return h.hexdigest()


def write_dataset(out_dir: Path, problem: Problem, truth: Optional[GroundTruth] = None,
                  spec: Optional[SyntheticSpec] = None) -> None:
    validate_problem(problem)
    ids = [task.task_id or f"t{t:02d}" for t, task in enumerate(problem.tasks)]
    if len(set(ids)) != len(ids) or not all(_ID_PATTERN.match(i) for i in ids):
        raise ValidationError("task ids must be unique and filename-safe")
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise UsageError(f"cannot create {out_dir}: {exc}") from exc
    header = ",".join(["target"] + [f"f{j}" for j in range(problem.d)])
    entries = []
    for tid, task in zip(ids, problem.tasks):
        name = f"task_{tid}.csv"
        rows = np.column_stack([task.targets, task.features])
        lines = [header] + [",".join(format(v, ".17g") for v in row) for row in rows]
        _write_text(out_dir / name, "\n".join(lines) + "\n")
        entries.append({"id": tid, "file": name, "loss": task.loss_kind, "n": task.n})
    kinds = sorted(set(problem.loss_kinds))
    manifest = {
        "format": DATASET_FORMAT,
        "d": problem.d,
        "loss_kind": kinds[0] if len(kinds) == 1 else "mixed",
        "tasks": entries,
        "fingerprint": problem_fingerprint(problem),
    }
    write_json(out_dir / "manifest.json", manifest)
    if truth is not None:
        payload = {
            "group_of_task": truth.group_of_task,
            "supports": [s.tolist() for s in truth.supports],
            "weights": matrix_to_json(truth.weights),
        }
        if spec is not None:
            payload["spec"] = asdict(spec)
        write_json(out_dir / "truth.json", payload)


def read_dataset(data_dir: Path):
    """Load ``(Problem, truth dict or None)`` from a dataset directory."""
    data_dir = Path(data_dir)
    if not data_dir.is_dir():
        raise UsageError(f"dataset directory {data_dir} does not exist")
    manifest = _read_json(data_dir / "manifest.json")
    try:
        d = int(manifest["d"])
        entries = manifest["tasks"]
    except (KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"malformed manifest in {data_dir}: {exc}") from exc
    expected = ["target"] + [f"f{j}" for j in range(d)]
    tasks = []
    for entry in entries:
        path = data_dir / entry["file"]
        try:
            with path.open() as fh:
                header = fh.readline().strip().split(",")
                body = np.loadtxt(fh, delimiter=",", ndmin=2)
        except OSError as exc:
            raise UsageError(f"cannot read {path}: {exc}") from exc
        except ValueError as exc:
            raise UsageError(f"{path} has non-numeric data: {exc}") from exc
        if header != expected:
            raise UsageError(f"{path}: header must be target,f0..f{d - 1}")
        if body.shape[0] == 0:
            body = np.empty((0, d + 1))
        loss = entry.get("loss", manifest.get("loss_kind"))
        if loss not in LOSS_KINDS:
            raise UsageError(f"{path}: unknown loss kind {loss!r}")
        tasks.append(TaskDataset(body[:, 1:], body[:, 0], loss, entry.get("id")))
    problem = Problem(tuple(tasks))
    validate_problem(problem)
    truth = None
    if (data_dir / "truth.json").exists():
        truth = _read_json(data_dir / "truth.json")
    return problem, truth


# -- manifests -------------------------------------------------------------------

@dataclass
class RunManifest:
    command: str
    config: dict
    seeds: list
    dataset_fingerprint: Optional[str]
    version: str = __version__
    backend: str = BACKEND
    duration_seconds: float = 0.0
    argv: list = field(default_factory=list)

    def finish(self, started: float) -> dict:
        self.duration_seconds = time.perf_counter() - started
        return asdict(self)


def _write_csv(path: Path, header, rows, manifest: dict) -> None:
    """CSV with the manifest as a leading ``# manifest: {json}`` comment line."""
    lines = ["# manifest: " + json.dumps(_jsonable(manifest), sort_keys=True), ",".join(header)]
    for row in rows:
        lines.append(",".join(_csv_cell(v) for v in row))
    _write_text(path, "\n".join(lines) + "\n")


def _csv_cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


# -- method flags ----------------------------------------------------------------

# flag name -> MethodSpec parameter
_HYPER_FLAGS = {
    "n_groups": "n_groups",
    "lam": "lam",
    "mu": "mu",
    "l1": "l1",
    "l2": "l2",
    "lambda_12": "lambda_12",
    "stl_l1": "stl_l1",
    "stl_l2": "stl_l2",
    "max_outer": "max_outer",
    "u_restarts": "u_restarts",
    "tol": "tol",
}


def _add_hyper_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("method hyperparameters (unused ones are ignored per method)")
    g.add_argument("--n-groups", type=int)
    g.add_argument("--lambda", dest="lam", type=float, help="group regularizer weight")
    g.add_argument("--mu", type=float, help="fusion weight (fusion-sgmtl only)")
    g.add_argument("--l1", type=float, help="elastic-net l1 penalty")
    g.add_argument("--l2", type=float, help="elastic-net l2 penalty")
    g.add_argument("--lambda-12", type=float, help="multitask lasso weight")
    g.add_argument("--stl-l1", type=float, help="l1 penalty of the warm-start fit")
    g.add_argument("--stl-l2", type=float, help="l2 penalty of the warm-start fit")
    g.add_argument("--max-outer", type=int)
    g.add_argument("--u-restarts", type=int)
    g.add_argument("--tol", type=float)


def method_params(method: str, args, seed: int, overrides: Optional[dict] = None) -> dict:
    """The subset of the hyperparameter flags that ``method`` accepts."""
    accepted = METHOD_PARAMS[method]
    params = {}
    for flag, key in _HYPER_FLAGS.items():
        value = getattr(args, flag, None)
        if value is not None and key in accepted:
            params[key] = value
    if overrides:
        params.update({k: v for k, v in overrides.items() if k in accepted})
    if "seed" in accepted:
        params["seed"] = seed
    return params


def _float_list(text: str):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _int_list(text: str):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


def _method_list(text: str):
    names = [v.strip() for v in text.split(",") if v.strip()]
    bad = [n for n in names if n not in METHODS]
    if bad or not names:
        raise argparse.ArgumentTypeError(f"unknown methods {bad}; choose from {', '.join(METHODS)}")
    return names


def _default_seed() -> int:
    raw = os.environ.get("SGMTL_SEED")
    if raw is None or raw == "":
        return 0
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"SGMTL_SEED must be an integer, got {raw!r}") from None


# -- commands ----------------------------------------------------------------

def _spec_from_args(args) -> SyntheticSpec:
    if args.preset:
        spec = PRESETS[args.preset](seed=args.seed)
    else:
        spec = SyntheticSpec(seed=args.seed)
    updates = {k: getattr(args, k) for k in
               ("m", "n_per_task", "d", "n_groups_true", "support_size", "overlap_fraction", "noise_sigma")
               if getattr(args, k, None) is not None}
    if getattr(args, "group_sizes", None) is not None:
        updates["group_sizes"] = tuple(args.group_sizes)
    return replace(spec, **updates)


def cmd_generate(args) -> int:
    spec = _spec_from_args(args)
    problem, truth = make_custom(spec)
    write_dataset(Path(args.out), problem, truth, spec)
    log.info("wrote %d tasks to %s", problem.m, args.out)
    return EXIT_OK


def _truth_metrics(result_weights, hard_groups, truth) -> dict:
    if truth is None:
        return {}
    out = {}
    W_true = matrix_from_json(truth["weights"])
    if W_true.shape == np.shape(result_weights):
        out["support_f1"] = support_f1(result_weights, W_true)
    if hard_groups is not None:
        ari, acc = group_recovery(hard_groups, np.asarray(truth["group_of_task"]))
        out["ari"] = ari
        out["best_perm_accuracy"] = acc
    return out


def cmd_fit(args) -> int:
    started = time.perf_counter()
    problem, truth = read_dataset(Path(args.data_dir))
    spec = MethodSpec(args.method, method_params(args.method, args, args.seed))
    result = fit_method(spec, problem)
    train = evaluate_weights(result.weights, list(problem.tasks))
    manifest = RunManifest("fit", {"method": spec.name, "params": spec.params}, [args.seed],
                           problem_fingerprint(problem), argv=list(args.argv))
    metrics = {
        "train_mse_per_task": train.mse_per_task,
        "train_mse_avg": float(np.mean(train.mse_per_task)),
        "train_r2_per_task": train.r2_per_task,
        "train_aucpr_per_task": train.aucpr_per_task,
    }
    metrics.update(_truth_metrics(result.weights, result.hard_groups, truth))
    payload = {
        "method": spec.name,
        "params": spec.params,
        "task_ids": [t.task_id for t in problem.tasks],
        "weights": matrix_to_json(result.weights),
    }
    if result.membership is not None:
        payload["membership"] = matrix_to_json(result.membership)
        payload["hard_groups"] = np.asarray(result.hard_groups).tolist()
    payload.update({
        "objective_trace": list(result.objective_trace),
        "converged": bool(result.converged),
        "iterations": int(result.iterations),
        "metrics": metrics,
    })
    payload["manifest"] = manifest.finish(started)
    write_json(Path(args.out), payload)
    return EXIT_OK


_GRID_FLAGS = (("lam_grid", "lam"), ("mu_grid", "mu"), ("l1_grid", "l1"), ("l2_grid", "l2"),
               ("lambda_12_grid", "lambda_12"), ("n_groups_grid", "n_groups"))


def grid_cells(args) -> list:
    """Cartesian product of the grid flags the method accepts."""
    accepted = METHOD_PARAMS[args.method]
    axes = [(key, getattr(args, flag)) for flag, key in _GRID_FLAGS
            if getattr(args, flag, None) and key in accepted]
    if not axes:
        return [{}]
    keys = [k for k, _ in axes]
    return [dict(zip(keys, combo)) for combo in itertools.product(*(v for _, v in axes))]


def cmd_cv(args) -> int:
    started = time.perf_counter()
    if args.folds < 2:
        raise UsageError("--folds must be at least 2")
    problem, _ = read_dataset(Path(args.data_dir))
    cells = [MethodSpec(args.method, method_params(args.method, args, args.seed, cell))
             for cell in grid_cells(args)]
    reports, best = grid_search(problem, cells, k_folds=args.folds, seed=args.seed, n_jobs=args.jobs)
    rows = []
    for rep in reports:
        fold_mse = [float(np.mean(f.mse_per_task)) for f in rep.folds]
        rows.append({
            "params": rep.method.params,
            "mse_avg": rep.metrics.mse_avg,
            "mse_fold_sd": float(np.std(fold_mse, ddof=1)) if len(fold_mse) > 1 else 0.0,
            "r2_avg": rep.metrics.r2_avg,
            "aucpr_avg": rep.metrics.aucpr_avg,
        })
    manifest = RunManifest("cv", {"method": args.method, "folds": args.folds,
                                  "cells": [c.params for c in cells]},
                           [args.seed], problem_fingerprint(problem), argv=list(args.argv))
    payload = {"method": args.method, "folds": args.folds, "cells": rows,
               "selected_index": best, "selected_params": reports[best].method.params,
               "manifest": manifest.finish(started)}
    write_json(Path(args.out), payload)
    return EXIT_OK


def cmd_sweep_n(args) -> int:
    started = time.perf_counter()
    if "n_groups" not in METHOD_PARAMS[args.method]:
        raise UsageError(f"method {args.method!r} has no group count to sweep")
    problem, _ = read_dataset(Path(args.data_dir))
    rows = []
    for N in args.n_list:
        t0 = time.perf_counter()
        spec = MethodSpec(args.method, method_params(args.method, args, args.seed, {"n_groups": N}))
        rep = cross_validate(problem, spec, k_folds=args.folds, seed=args.seed, n_jobs=args.jobs)
        used = [int(np.unique(f.hard_groups).size) for f in rep.folds if f.hard_groups is not None]
        rows.append((N, rep.metrics.mse_avg, rep.metrics.r2_avg,
                     float(np.mean(used)) if used else None, time.perf_counter() - t0))
    config = {"method": args.method, "n_list": args.n_list, "folds": args.folds,
              "params": method_params(args.method, args, args.seed)}
    manifest = RunManifest("sweep-n", config, [args.seed], problem_fingerprint(problem),
                           argv=list(args.argv))
    _write_csv(Path(args.out), ["n_groups", "mse_avg", "r2_avg", "groups_used", "seconds"], rows,
               manifest.finish(started))
    return EXIT_OK


def cmd_samplesweep(args) -> int:
    started = time.perf_counter()
    spec = _spec_from_args(args)
    spec.check()
    methods = [MethodSpec(name, method_params(name, args, args.seed)) for name in args.methods]
    seeds = args.seeds if args.seeds else [args.seed]
    rows = sample_complexity_sweep(spec, args.n_grid, methods, seeds, n_test=args.n_test, n_jobs=args.jobs)
    config = {"spec": asdict(spec), "n_grid": args.n_grid, "n_test": args.n_test,
              "methods": [{"name": m.name, "params": m.params} for m in methods]}
    manifest = RunManifest("samplesweep", config, list(seeds), None, argv=list(args.argv))
    _write_csv(Path(args.out), ["n", "method", "mse", "ari", "support_f1"],
               [(r.n, r.method, r.mse, r.ari, r.support_f1) for r in rows], manifest.finish(started))
    return EXIT_OK


# -- parser ------------------------------------------------------------------

def _add_spec_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("synthetic data (flags override the preset)")
    g.add_argument("--preset", choices=sorted(PRESETS))
    g.add_argument("--m", type=int, help="number of tasks")
    g.add_argument("--n-per-task", type=int)
    g.add_argument("--d", type=int, help="number of features")
    g.add_argument("--n-groups-true", type=int)
    g.add_argument("--support-size", type=int)
    g.add_argument("--overlap-fraction", type=float)
    g.add_argument("--noise-sigma", type=float)
    g.add_argument("--group-sizes", type=_int_list)


def build_parser(default_seed: int = 0) -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sgmtl", description="Sparsity-grouped multitask learning.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, jobs=False):
        p.add_argument("--seed", type=int, default=default_seed,
                       help="random seed (default: $SGMTL_SEED or 0)")
        if jobs:
            p.add_argument("--jobs", type=int, default=1, help="worker processes")

    p = sub.add_parser("generate", help="write a synthetic dataset directory")
    _add_spec_flags(p)
    p.add_argument("--out", required=True, help="output directory")
    common(p)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("fit", help="fit one method on a dataset and write a result JSON")
    p.add_argument("data_dir")
    p.add_argument("--method", required=True, choices=METHODS)
    _add_hyper_flags(p)
    p.add_argument("--out", required=True, help="result JSON path")
    common(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("cv", help="k-fold CV grid search")
    p.add_argument("data_dir")
    p.add_argument("--method", required=True, choices=METHODS)
    _add_hyper_flags(p)
    g = p.add_argument_group("grids (comma-separated; combined as a Cartesian product)")
    g.add_argument("--lambda-grid", dest="lam_grid", type=_float_list)
    g.add_argument("--mu-grid", type=_float_list)
    g.add_argument("--l1-grid", type=_float_list)
    g.add_argument("--l2-grid", type=_float_list)
    g.add_argument("--lambda-12-grid", type=_float_list)
    g.add_argument("--n-groups-grid", type=_int_list)
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--out", required=True, help="result JSON path")
    common(p, jobs=True)
    p.set_defaults(func=cmd_cv)

    p = sub.add_parser("sweep-n", help="CV error as a function of the group count")
    p.add_argument("data_dir")
    p.add_argument("--method", default="fusion-sgmtl", choices=METHODS)
    p.add_argument("--n-list", type=_int_list, default=[2, 4, 5, 6, 10])
    _add_hyper_flags(p)
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--out", required=True, help="output CSV path")
    common(p, jobs=True)
    p.set_defaults(func=cmd_sweep_n)

    p = sub.add_parser("samplesweep", help="test error and recovery versus examples per task")
    _add_spec_flags(p)
    p.add_argument("--n-grid", type=_int_list, required=True)
    p.add_argument("--methods", type=_method_list, default=["sgmtl", "single-group"])
    p.add_argument("--seeds", type=_int_list)
    p.add_argument("--n-test", type=int, default=100)
    _add_hyper_flags(p)
    p.add_argument("--out", required=True, help="output CSV path")
    common(p, jobs=True)
    p.set_defaults(func=cmd_samplesweep)
    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        seed = _default_seed()
    except UsageError as exc:
        print(f"sgmtl: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    parser = build_parser(seed)
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else EXIT_USAGE
    args.argv = argv
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "jobs", 1) < 1:
        print("sgmtl: error: --jobs must be at least 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except _SOLVER_ERRORS as exc:
        print(f"sgmtl: solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (UsageError, ValidationError) as exc:
        print(f"sgmtl: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SGMTLError as exc:
        print(f"sgmtl: error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
