import numpy as np
import pytest

from rfclust.benchmark import make_class, make_instance, suite_instances
from rfclust.de import (
    NAMED_CONFIGS,
    DEConfig,
    PerformanceRecord,
    collect_performance,
    crossover_binomial,
    de_run,
    de_trace,
    de_traces,
    log_precision,
    mutate,
    named_config,
)


def test_named_configs():
    assert NAMED_CONFIGS["de1"] == ("Best3Bin", 0.533, 0.809)
    cfg = named_config("DE2", dimension=10)
    assert (cfg.strategy, cfg.F, cfg.Cr, cfg.population_size, cfg.budget) == ("Best1Bin", 0.617, 0.514, 10, 5000)
    with pytest.raises(ValueError):
        named_config("de9")


@pytest.mark.parametrize("kwargs", [dict(F=2.5), dict(Cr=1.5), dict(population_size=3), dict(runs=0)])
def test_config_validation(kwargs):
    base = dict(algorithm_id="x", strategy="Best1Bin", F=0.5, Cr=0.5)
    with pytest.raises(ValueError):
        DEConfig(**{**base, **kwargs})


def test_mutate_best1bin_formula():
    pop = np.arange(20, dtype=float).reshape(5, 4)
    rng = np.random.default_rng(0)
    m = mutate("Best1Bin", pop, 2, 0.5, rng, targets=[0])
    # the mutant lies on best + F * (difference of two other rows)
    diffs = {tuple(0.5 * (pop[a] - pop[b])) for a in range(1, 5) for b in range(1, 5) if a != b}
    assert tuple(m[0] - pop[2]) in diffs


def test_mutate_rejects_small_population():
    with pytest.raises(ValueError):
        mutate("Best3Bin", np.zeros((5, 2)), 0, 0.5, np.random.default_rng(0))


def test_crossover_keeps_one_mutant_gene():
    rng = np.random.default_rng(0)
    t, m = np.zeros((50, 6)), np.ones((50, 6))
    trial = crossover_binomial(t, m, 0.0, rng)
    assert np.all(trial.sum(axis=1) == 1)
    assert np.all(crossover_binomial(t, m, 1.0, rng) == 1)
    assert crossover_binomial(np.zeros(3), np.ones(3), 0.0, rng).shape == (3,)


@pytest.mark.parametrize("alg", ["de1", "de2", "de3"])
def test_trace_properties(alg):
    inst = make_instance(make_class(4, "rastrigin", 5), 1)
    cfg = named_config(alg, dimension=8, budget_factor=50, runs=3)
    trace = de_trace(cfg, inst, 1)
    assert len(trace) == cfg.budget
    assert np.all(np.diff(trace) <= 0) and np.all(trace >= 0)
    assert de_run(cfg, inst, 1) == trace[-1]


def test_budget_respected_with_partial_generation():
    inst = make_instance(make_class(1, "sphere", 3), 1)
    cfg = DEConfig("x", "Best1Bin", 0.5, 0.9, population_size=8, budget=45, runs=1)
    inst.evaluation_counter = 0
    assert len(de_trace(cfg, inst, 0)) == 45
    assert inst.evaluation_counter == 45


@pytest.mark.parametrize("alg", ["de1", "de2", "de3"])
def test_batched_runs_equal_single_runs(alg):
    inst = suite_instances("classic12-multi5", 6)[13]
    cfg = named_config(alg, dimension=8, budget_factor=30, runs=5)
    batch = de_traces(cfg, inst, range(5))
    for r in (0, 2, 4):
        assert np.array_equal(batch[r], de_trace(cfg, inst, r))


def test_determinism_and_run_independence():
    inst = make_instance(make_class(2, "ellipsoid", 4), 2)
    cfg = named_config("de3", dimension=8, budget_factor=40, runs=4, seed=3)
    assert np.array_equal(de_trace(cfg, inst, 2), de_trace(cfg, inst, 2))
    assert not np.array_equal(de_trace(cfg, inst, 1), de_trace(cfg, inst, 2))
    with pytest.raises(ValueError):
        de_trace(cfg, inst, 4)


def test_records_and_log_precision():
    inst = suite_instances("classic12-single", 4)[:2]
    cfg = named_config("de1", dimension=8, budget_factor=20, runs=3)
    recs = collect_performance(cfg, inst, "classic12-single")
    assert [r.class_id for r in recs] == [1, 2] and all(len(r.run_precisions) == 3 for r in recs)
    rec = PerformanceRecord("de1", "s", 1, 1, [1e-3, 1e-1, 10.0])
    assert rec.median_precision == 1e-1
    assert rec.log_median_precision == pytest.approx(-1.0)
    assert log_precision(0.0) == -12.0
