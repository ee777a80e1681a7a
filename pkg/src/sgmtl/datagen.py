"""Synthetic multitask regression problems with known group structure."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from sgmtl.core import Problem, TaskDataset
from sgmtl.errors import InfeasibleSpec


@dataclass(frozen=True)
class SyntheticSpec:
    m: int = 30
    n_per_task: int = 15
    d: int = 21
    n_groups_true: int = 3
    support_size: int = 7
    overlap_fraction: float = 0.0
    noise_sigma: float = 0.5
    seed: int = 0
    group_sizes: Optional[Sequence[int]] = None

    def check(self):
        if self.m < 1 or self.n_per_task < 1 or self.d < 1 or self.n_groups_true < 1:
            raise InfeasibleSpec("counts must be positive")
        if not 0.0 <= self.overlap_fraction < 1.0:
            raise InfeasibleSpec("overlap_fraction must lie in [0, 1)")
        if self.noise_sigma < 0:
            raise InfeasibleSpec("noise_sigma must be nonnegative")
        if self.support_size < 1:
            raise InfeasibleSpec("support_size must be positive")
        if _span(self) > self.d:
            raise InfeasibleSpec(
                f"{self.n_groups_true} supports of size {self.support_size} with "
                f"overlap {self.overlap_fraction} need {_span(self)} features, d={self.d}"
            )
        sizes = self.sizes()
        if len(sizes) != self.n_groups_true or sum(sizes) != self.m or min(sizes) < 1:
            raise InfeasibleSpec("group sizes must be positive and sum to m")

    def sizes(self):
        if self.group_sizes is not None:
            return [int(s) for s in self.group_sizes]
        if self.m % self.n_groups_true:
            raise InfeasibleSpec("m must be divisible by n_groups_true unless group_sizes is given")
        return [self.m // self.n_groups_true] * self.n_groups_true


@dataclass(frozen=True)
class GroundTruth:
    weights: np.ndarray
    group_of_task: np.ndarray
    supports: tuple


def _overlap(spec) -> int:
    return int(round(spec.overlap_fraction * spec.support_size))


def _span(spec) -> int:
    """Number of distinct features covered by all supports."""
    s, o, N = spec.support_size, _overlap(spec), spec.n_groups_true
    if o == 0 or N == 1:
        return N * s
    if N == 2:
        return 2 * s - o
    return N * (s - o)


def group_supports(spec: SyntheticSpec) -> tuple:
    """Support index sets; adjacent groups (circularly, for 3+ groups) share
    ``round(overlap_fraction * support_size)`` features."""
    s, o, N = spec.support_size, _overlap(spec), spec.n_groups_true
    if o == 0 or N == 1:
        return tuple(np.arange(g * s, (g + 1) * s) for g in range(N))
    step = s - o
    if N == 2:
        return (np.arange(0, s), np.arange(step, step + s))
    span = N * step
    return tuple(np.sort((g * step + np.arange(s)) % span) for g in range(N))


def make_custom(spec: SyntheticSpec):
    """Draw ``(Problem, GroundTruth)`` from ``spec``.

    Each task gets standard-normal weights on its group's support, a
    standard-normal design and targets ``X w + noise_sigma * eps``.
    """
    spec.check()
    rng = np.random.default_rng(spec.seed)
    supports = group_supports(spec)
    groups = np.repeat(np.arange(spec.n_groups_true), spec.sizes())
    W = np.zeros((spec.d, spec.m))
    for t, g in enumerate(groups):
        W[supports[g], t] = rng.standard_normal(supports[g].size)
    tasks = []
    for t in range(spec.m):
        X = rng.standard_normal((spec.n_per_task, spec.d))
        y = X @ W[:, t] + spec.noise_sigma * rng.standard_normal(spec.n_per_task)
        tasks.append(TaskDataset(X, y, "squared", f"t{t:02d}"))
    return Problem(tasks), GroundTruth(W, groups, supports)


def set1_spec(seed: int = 0, noise_sigma: float = 0.5) -> SyntheticSpec:
    return SyntheticSpec(m=30, n_per_task=15, d=21, n_groups_true=3, support_size=7,
                         overlap_fraction=0.0, noise_sigma=noise_sigma, seed=seed)


def set2_spec(seed: int = 0, noise_sigma: float = 0.5) -> SyntheticSpec:
    return SyntheticSpec(m=30, n_per_task=100, d=150, n_groups_true=5, support_size=30,
                         overlap_fraction=0.3, noise_sigma=noise_sigma, seed=seed)


def make_set1(seed: int = 0, noise_sigma: float = 0.5):
    """30 tasks in 3 groups, 21 features, 15 examples per task, disjoint
    supports of 7 features."""
    return make_custom(set1_spec(seed, noise_sigma))


def make_set2(seed: int = 0, noise_sigma: float = 0.5):
    """30 tasks in 5 groups, 150 features, 100 examples per task; supports of
    30 features, adjacent groups sharing 9."""
    return make_custom(set2_spec(seed, noise_sigma))


PRESETS = {"set1": set1_spec, "set2": set2_spec}
