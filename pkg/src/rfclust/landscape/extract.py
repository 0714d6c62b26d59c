"""Repeated sampling and per-feature medians for whole problem instances."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .._seeding import rng_for
from ..benchmark import ProblemInstance, evaluate_batch
from .features import FEATURE_NAMES, all_features, distance_summary, knn_table
from .sampling import SAMPLERS, lhs_sample


@dataclass(frozen=True)
class SampleDesign:
    sample_size: int
    repetitions: int = 30
    sampler: str = "ImprovedLHS"
    seed: int = 0

    def __post_init__(self):
        if self.sample_size < 1 or self.repetitions < 1:
            raise ValueError("sample_size and repetitions must be positive")
        if self.sampler not in SAMPLERS:
            raise ValueError(f"unknown sampler {self.sampler!r}")

    @classmethod
    def scaled(cls, dimension: int, sample_factor: int = 800, **kwargs) -> "SampleDesign":
        return cls(sample_size=sample_factor * dimension, **kwargs)


@dataclass
class FeatureVector:
    suite: str
    class_id: int
    instance_id: int
    values: dict[str, float]
    flags: dict[str, int] = field(default_factory=dict)

    def as_array(self, names: Sequence[str]) -> np.ndarray:
        return np.array([self.values[n] for n in names], dtype=float)


class DesignPool:
    """Sample designs and their X-only statistics, shared by all instances.

    Designs depend on (seed, repetition) only, so every instance of a suite
    is probed at the same points, and the all-pairs distance summary and the
    k-nearest-neighbour table are computed once per repetition.
    """

    def __init__(self, design: SampleDesign, lower, upper):
        self.design = design
        self.lower = np.asarray(lower, dtype=float)
        self.upper = np.asarray(upper, dtype=float)
        self._cache: dict[int, tuple] = {}

    def get(self, rep: int) -> tuple:
        """``(X, distance_summary(X), knn_table(X))`` for repetition ``rep``."""
        if rep not in self._cache:
            D = len(self.lower)
            X = lhs_sample(self.design.sample_size, D, (self.lower, self.upper),
                           self.design.sampler, rng_for(self.design.seed, rep))
            self._cache[rep] = (X, distance_summary(X), knn_table(X))
        return self._cache[rep]


def compute_features(instance: ProblemInstance, design: SampleDesign, suite: str = "",
                     pool: DesignPool | None = None) -> FeatureVector:
    D = instance.dimension
    if design.sample_size < 4 * D:
        raise ValueError(f"sample_size must be at least 4*D = {4 * D}")
    pool = pool or DesignPool(design, instance.lower, instance.upper)
    per_rep = []
    flag_counts = dict.fromkeys(FEATURE_NAMES, 0)
    for rep in range(design.repetitions):
        X, stats_all, knn = pool.get(rep)
        y = evaluate_batch(instance, X)
        feats = all_features(X, y, all_stats=stats_all, knn=knn)
        per_rep.append([feats[n] for n in FEATURE_NAMES])
        for name in feats.flags:
            flag_counts[name] += 1
    medians = np.median(np.asarray(per_rep), axis=0)
    values = {n: float(v) for n, v in zip(FEATURE_NAMES, medians)}
    return FeatureVector(suite, instance.class_id, instance.instance_id, values, flag_counts)


class _RepJob:
    """Features of every instance for one repetition (picklable for worker processes)."""

    def __init__(self, instances, design):
        self.instances, self.design = instances, design

    def __call__(self, rep: int):
        first = self.instances[0]
        X, stats_all, knn = DesignPool(self.design, first.lower, first.upper).get(rep)
        values = np.empty((len(self.instances), len(FEATURE_NAMES)))
        flags = np.zeros_like(values, dtype=bool)
        for i, inst in enumerate(self.instances):
            feats = all_features(X, evaluate_batch(inst, X), all_stats=stats_all, knn=knn)
            values[i] = [feats[n] for n in FEATURE_NAMES]
            flags[i] = [n in feats.flags for n in FEATURE_NAMES]
        return values, flags


def compute_suite_features(instances: Sequence[ProblemInstance], design: SampleDesign,
                           suite: str = "", mapper=map) -> list[FeatureVector]:
    """Feature vectors for a suite, sorted by (class_id, instance_id).

    Work is split by repetition so each design is built once, whichever
    ``mapper`` runs the jobs. The result equals calling
    :func:`compute_features` per instance.
    """
    instances = list(instances)
    if not instances:
        return []
    D = instances[0].dimension
    if design.sample_size < 4 * D:
        raise ValueError(f"sample_size must be at least 4*D = {4 * D}")
    per_rep = list(mapper(_RepJob(instances, design), range(design.repetitions)))
    values = np.stack([v for v, _ in per_rep])
    flags = np.stack([f for _, f in per_rep]).sum(axis=0)
    medians = np.median(values, axis=0)
    out = [FeatureVector(suite, inst.class_id, inst.instance_id,
                         {n: float(v) for n, v in zip(FEATURE_NAMES, medians[i])},
                         {n: int(c) for n, c in zip(FEATURE_NAMES, flags[i])})
           for i, inst in enumerate(instances)]
    return sorted(out, key=lambda v: (v.class_id, v.instance_id))
