"""Time the compiled coordinate kernels against their pure-Python mirrors.

    python benchmarks/bench_kernels.py [--repeats 3] [--preset set2]

Each kernel runs on identical copies of the same inputs under both
backends; the script prints per-call times, the speedup, and the largest
difference between the two outputs.
"""

import argparse
import sys
import time

import numpy as np

from sgmtl import _backend
from sgmtl.baselines import ElasticNetConfig, fit_stl
from sgmtl.core import SolverConfig, random_membership
from sgmtl.datagen import PRESETS, make_custom
from sgmtl.w_step import PackedProblem


def _best_time(fn, repeats):
    best = np.inf
    out = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def bench_w_pass(problem, repeats):
    config = SolverConfig(n_groups=5, lam=1e-3)
    packed = PackedProblem(problem)
    W0 = fit_stl(problem, ElasticNetConfig(l1=0.05, l2=0.01))
    U = random_membership(config.n_groups, problem.m, np.random.default_rng(0))

    def run(kernel):
        W = W0.copy()
        Z = packed.margins(W)
        kernel(packed.XT, packed.y, packed.offsets, packed.kinds, packed.sqnorm, packed.curv,
               W, U, config.lambdas, Z, config.w_step_size, False)
        return W

    return {name: _best_time(lambda k=k: run(k), repeats) for name, k in _kernels("w_pass").items()}


def bench_enet_pass(problem, repeats):
    task = problem.tasks[0]
    X = task.features
    XT = np.ascontiguousarray(X.T)
    y = np.ascontiguousarray(task.targets)
    sq = np.ascontiguousarray((X * X).sum(axis=0) / task.n)

    def run(kernel):
        w = np.zeros(task.d)
        z = np.zeros(task.n)
        for _ in range(20):
            kernel(XT, y, w, z, sq, sq, 0.05, 0.01, False)
        return w

    return {name: _best_time(lambda k=k: run(k), repeats) for name, k in _kernels("enet_pass").items()}


def _kernels(attr):
    out = {"python": getattr(_backend.python, attr)}
    if _backend.compiled is not None:
        out["cython"] = getattr(_backend.compiled, attr)
    return out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeats", type=int, default=3)
    ap.add_argument("--preset", choices=sorted(PRESETS), default="set2")
    args = ap.parse_args(argv)
    problem, _ = make_custom(PRESETS[args.preset](seed=0))
    if _backend.compiled is None:
        print("compiled extension unavailable; timing the Python kernels only")
    print(f"{'kernel':<30}{'python s':>12}{'cython s':>12}{'speedup':>10}{'max |diff|':>14}")
    for label, res in (("w_pass (1 sweep)", bench_w_pass(problem, args.repeats)),
                       ("enet_pass (20 sweeps, task 0)", bench_enet_pass(problem, args.repeats))):
        tp, wp = res["python"]
        if "cython" in res:
            tc, wc = res["cython"]
            diff = float(np.max(np.abs(wp - wc)))
            print(f"{label:<30}{tp:>12.4f}{tc:>12.5f}{tp / tc:>10.1f}{diff:>14.2e}")
        else:
            print(f"{label:<30}{tp:>12.4f}{'-':>12}{'-':>10}{'-':>14}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
