"""Fixed-budget Differential Evolution used to produce performance targets."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ._seeding import rng_for
from .benchmark import ProblemInstance, evaluate_batch

STRATEGIES = ("Best1Bin", "Best3Bin", "RandRandBin")

# donors consumed by each strategy (base vector included for RandRandBin)
_DONORS = {"Best1Bin": 2, "Best3Bin": 6, "RandRandBin": 7}

LOG_FLOOR = 1e-12


@dataclass(frozen=True)
class DEConfig:
    algorithm_id: str
    strategy: str
    F: float
    Cr: float
    population_size: int = 10
    budget: int = 5000
    runs: int = 30
    seed: int = 0

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}")
        if not 0.0 <= self.F <= 2.0:
            raise ValueError("F must lie in [0, 2]")
        if not 0.0 <= self.Cr <= 1.0:
            raise ValueError("Cr must lie in [0, 1]")
        if self.population_size < 4:
            raise ValueError("population_size must be at least 4")
        if self.runs < 1:
            raise ValueError("runs must be positive")


# Three configurations as published (strategy, F, Cr).
NAMED_CONFIGS = {
    "de1": ("Best3Bin", 0.533, 0.809),
    "de2": ("Best1Bin", 0.617, 0.514),
    "de3": ("RandRandBin", 0.516, 0.686),
}


def named_config(algorithm_id: str, dimension: int = 10, budget_factor: int = 500,
                 runs: int = 30, seed: int = 0) -> DEConfig:
    """DE configuration by id with population = D and budget = budget_factor * D."""
    try:
        strategy, F, Cr = NAMED_CONFIGS[algorithm_id.lower()]
    except KeyError:
        raise ValueError(f"unknown algorithm {algorithm_id!r}") from None
    return DEConfig(algorithm_id.lower(), strategy, F, Cr, population_size=dimension,
                    budget=budget_factor * dimension, runs=runs, seed=seed)


@dataclass
class PerformanceRecord:
    algorithm_id: str
    suite: str
    class_id: int
    instance_id: int
    run_precisions: list[float] = field(default_factory=list)

    @property
    def median_precision(self) -> float:
        return float(np.median(self.run_precisions))

    @property
    def log_median_precision(self) -> float:
        return log_precision(self.median_precision)


def log_precision(value: float) -> float:
    return math.log10(max(value, LOG_FLOOR))


def _donor_indices(rng, n: int, k: int, targets: np.ndarray) -> np.ndarray:
    # k distinct indices per target row, none equal to the target itself
    keys = rng.random((len(targets), n))
    keys[np.arange(len(targets)), targets] = np.inf
    return np.argsort(keys, axis=1, kind="stable")[:, :k]


def mutate(strategy: str, population: np.ndarray, best_index: int, F: float, rng,
           targets: Sequence[int] | None = None) -> np.ndarray:
    """Mutant vectors for each target index (all rows when ``targets`` is None).

    Returns a 2-D array with one mutant per target.
    """
    n = population.shape[0]
    targets = np.arange(n) if targets is None else np.asarray(targets)
    k = _DONORS[strategy]
    if n - 1 < k:
        raise ValueError(f"{strategy} needs at least {k + 1} population members, got {n}")
    idx = _donor_indices(rng, n, k, targets)
    if strategy == "Best1Bin":
        diff = population[idx[:, 0]] - population[idx[:, 1]]
        return population[best_index] + F * diff
    if strategy == "Best3Bin":
        diff = sum(population[idx[:, 2 * j]] - population[idx[:, 2 * j + 1]] for j in range(3))
        return population[best_index] + F * diff
    # RandRandBin: random base, 1..3 difference pairs drawn per mutant
    pairs = rng.integers(1, 4, size=len(targets))
    diff = np.zeros((len(targets), population.shape[1]))
    for j in range(3):
        active = (pairs > j)[:, None]
        diff += active * (population[idx[:, 1 + 2 * j]] - population[idx[:, 2 + 2 * j]])
    return population[idx[:, 0]] + F * diff


def crossover_binomial(target: np.ndarray, mutant: np.ndarray, Cr: float, rng) -> np.ndarray:
    """Binomial crossover; works on single vectors or row-wise on matrices."""
    target = np.asarray(target, dtype=float)
    mutant = np.asarray(mutant, dtype=float)
    if target.shape != mutant.shape:
        raise ValueError("target and mutant must have the same shape")
    t2 = np.atleast_2d(target)
    m2 = np.atleast_2d(mutant)
    n, D = t2.shape
    mask = rng.random((n, D)) < Cr
    mask[np.arange(n), rng.integers(0, D, size=n)] = True
    trial = np.where(mask, m2, t2)
    return trial.reshape(target.shape)


def de_traces(config: DEConfig, instance: ProblemInstance, run_indices: Sequence[int]) -> np.ndarray:
    """Best-so-far precision after every evaluation, one row per run index.

    The runs advance in lockstep so the arithmetic is vectorised across
    them, but each run draws from its own stream in the same order as
    :func:`mutate` followed by :func:`crossover_binomial` would. A run's
    trace is therefore the same whichever other runs share the batch.
    """
    runs = [int(r) for r in run_indices]
    for r in runs:
        if not 0 <= r < config.runs:
            raise ValueError(f"run_index {r} outside [0, {config.runs})")
    NP, D = config.population_size, instance.dimension
    if config.budget < NP:
        raise ValueError("budget must be at least the population size")
    k = _DONORS[config.strategy]
    if NP - 1 < k:
        raise ValueError(f"{config.strategy} needs a population of at least {k + 1}")
    rngs = [rng_for(config.seed, instance.class_id, instance.instance_id, r) for r in runs]
    R = len(rngs)
    lo, hi = instance.lower, instance.upper
    run_axis = np.arange(R)

    pop = np.stack([g.uniform(lo, hi, size=(NP, D)) for g in rngs])
    fit = evaluate_batch(instance, pop.reshape(-1, D)).reshape(R, NP)
    history = [fit.copy()]
    used = NP
    rand_rand = config.strategy == "RandRandBin"
    while used < config.budget:
        m = min(NP, config.budget - used)
        rows = np.arange(m)
        best = fit.argmin(axis=1)
        keys, pairs, mask, jrand = [], [], [], []
        for g in rngs:
            keys.append(g.random((m, NP)))
            if rand_rand:
                pairs.append(g.integers(1, 4, size=m))
            mask.append(g.random((m, D)))
            jrand.append(g.integers(0, D, size=m))
        keys = np.stack(keys)
        keys[:, rows, rows] = np.inf
        idx = np.argsort(keys, axis=2, kind="stable")[:, :, :k]
        P = pop[run_axis[:, None, None], idx]  # (R, m, k, D)
        if rand_rand:
            pairs = np.stack(pairs)
            diff = np.zeros((R, m, D))
            for j in range(3):
                diff += (pairs > j)[:, :, None] * (P[:, :, 1 + 2 * j] - P[:, :, 2 + 2 * j])
            mutants = P[:, :, 0] + config.F * diff
        else:
            diff = P[:, :, 0] - P[:, :, 1]
            for j in range(1, k // 2):
                diff = diff + (P[:, :, 2 * j] - P[:, :, 2 * j + 1])
            mutants = pop[run_axis, best][:, None, :] + config.F * diff
        cross = np.stack(mask) < config.Cr
        cross[run_axis[:, None], rows[None, :], np.stack(jrand)] = True
        trials = np.clip(np.where(cross, mutants, pop[:, :m]), lo, hi)
        trial_fit = evaluate_batch(instance, trials.reshape(-1, D)).reshape(R, m)
        history.append(trial_fit)
        used += m
        better = trial_fit <= fit[:, :m]
        head = pop[:, :m]
        head[better] = trials[better]
        fit[:, :m] = np.where(better, trial_fit, fit[:, :m])

    best_so_far = np.minimum.accumulate(np.concatenate(history, axis=1), axis=1)
    return np.maximum(0.0, best_so_far - instance.optimum_value)


def de_trace(config: DEConfig, instance: ProblemInstance, run_index: int) -> np.ndarray:
    """Best-so-far precision after every one of ``config.budget`` evaluations."""
    return de_traces(config, instance, [run_index])[0]


def de_run(config: DEConfig, instance: ProblemInstance, run_index: int) -> float:
    """Precision of the best point found within the evaluation budget."""
    return float(de_trace(config, instance, run_index)[-1])


def collect_performance(config: DEConfig, instances: Sequence[ProblemInstance],
                        suite: str = "") -> list[PerformanceRecord]:
    records = []
    for inst in instances:
        precs = de_traces(config, inst, range(config.runs))[:, -1].tolist()
        records.append(PerformanceRecord(config.algorithm_id, suite, inst.class_id,
                                         inst.instance_id, precs))
    return records
