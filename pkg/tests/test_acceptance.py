"""Acceptance criteria. Each test prints one PASS/FAIL line with the measured numbers."""

import json
import math
import subprocess
import sys
import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import synthetic_dataset, synthetic_sources
from rfclust.benchmark import evaluate_batch, make_class, make_instance, suite_instances
from rfclust.config import ExperimentConfig
from rfclust.de import de_traces, named_config
from rfclust.forest import HyperParams, fit_tree
from rfclust.landscape import features as F
from rfclust.landscape.sampling import lhs_sample
from rfclust.lopo import Dataset, Row, compare, join_dataset, make_lopo_folds, mae, run_lopo
from rfclust.pipeline import experiment, targets_for
from rfclust.similarity_calibration import (
    Neighbor,
    NeighborSet,
    SimilarityConfig,
    aggregate,
    calibrate,
    normalize_features,
)

SMALL_GRID = [HyperParams(10, "all", 3, 2), HyperParams(10, "sqrt", 7, 5)]
THRESHOLDS = (0.5, 0.7, 0.9)

# Pilot: DE1 on the untransformed 10-D sphere, 30 runs, budget 5000, seed 0 gave a
# median precision of 1.996501127637454e-15; the bound is twice that.
DE_BOUND = 3.993002255274908e-15


def test_01_calibration_algebra(accept):
    start = time.perf_counter()
    rng = np.random.default_rng(2024)
    worst_mid = worst_half = 0.0
    for _ in range(1000):
        k = int(rng.integers(1, 12))
        raw = float(rng.normal(0, 5))
        sims = rng.uniform(0.05, 1.0, k)
        perfs = rng.normal(0, 5, k)
        method = ("weighted_mean", "mean", "median")[int(rng.integers(3))]
        ns = NeighborSet(tuple(Neighbor(i, float(s), float(p)) for i, (s, p) in enumerate(zip(sims, perfs))))
        c = calibrate(raw, ns, method)
        worst_mid = max(worst_mid, abs(c.final - (raw + aggregate(ns, method)) / 2))
        p_star = float(rng.normal(0, 5))
        same = NeighborSet(tuple(Neighbor(i, float(s), p_star) for i, s in enumerate(sims)))
        c = calibrate(raw, same, method)
        worst_half = max(worst_half, abs(abs(c.final - p_star) - abs(raw - p_star) / 2))
    elapsed = time.perf_counter() - start
    ok = worst_mid <= 1e-12 and worst_half <= 1e-12 and elapsed < 1.0
    accept(1, "calibration algebra", ok,
           f"max |final-(raw+F)/2| = {worst_mid:.2e}, max halving residual = {worst_half:.2e}, "
           f"{elapsed:.2f}s (limits 1e-12, 1s)")
    assert ok


def test_02_fallback_above_one(accept):
    start = time.perf_counter()
    ds = synthetic_dataset()
    scaled, _ = normalize_features(ds.X)
    assert len(np.unique(scaled, axis=0)) == len(ds), "precondition: no duplicate normalized rows"
    t = 1.0 + 1e-9
    reports = run_lopo(ds, SMALL_GRID, [SimilarityConfig(t)], seed=1)
    bitwise = all(r.rfclust_abs_errors[t] == r.rf_abs_errors and sum(r.neighbor_counts[t]) == 0
                  for r in reports)
    summary = compare(reports, t)
    elapsed = time.perf_counter() - start
    ok = bitwise and summary.n_equal == len(ds.classes) and elapsed < 10
    accept(2, "fallback at threshold 1+1e-9", ok,
           f"bitwise-equal errors in every fold: {bitwise}, n_equal = {summary.n_equal}/"
           f"{len(ds.classes)}, {elapsed:.2f}s (limit 10s)")
    assert ok


def test_03_threshold_monotonicity(accept):
    failures = []
    n_examples = [0]

    @settings(max_examples=15, deadline=None, database=None)
    @given(st.integers(0, 2**31 - 1), st.integers(4, 8), st.integers(2, 4), st.integers(2, 6),
           st.floats(0.05, 1.5))
    def check(seed, n_classes, per_class, n_features, noise):
        n_examples[0] += 1
        ds = synthetic_dataset(n_classes, per_class, n_features, seed, noise)
        reports = run_lopo(ds, [HyperParams(5, "all", 3, 2)], [SimilarityConfig(t) for t in THRESHOLDS],
                           seed=seed)
        for rep in reports:
            sets = {}
            for q in rep.queries:
                key = (q["class_id"], q["instance_id"])
                sets.setdefault(key, {})[q["threshold"]] = {(n["class_id"], n["instance_id"])
                                                            for n in q["neighbors"]}
            for key, by_t in sets.items():
                if not by_t[0.9] <= by_t[0.7] <= by_t[0.5]:
                    failures.append(("subset", seed, key))
        eq = [compare(reports, t).n_equal for t in THRESHOLDS]
        if not eq[0] <= eq[1] <= eq[2]:
            failures.append(("n_equal", seed, eq))
        assert not failures

    start = time.perf_counter()
    try:
        check()
    finally:
        elapsed = time.perf_counter() - start
        ok = not failures and elapsed < 5
        accept(3, "threshold monotonicity", ok,
               f"{n_examples[0]} generated datasets, {len(failures)} violations, {elapsed:.2f}s (limit 5s)")
    assert ok


def test_04_trichotomy(accept):
    start = time.perf_counter()
    vectors, records = synthetic_sources(n_classes=12, per_class=2)
    names = sorted(vectors[0].values)[:6]
    sums = []
    for alg in ("de1", "de2", "de3"):
        ds = join_dataset(vectors, targets_for(records, alg), names)
        reports = run_lopo(ds, [HyperParams(5, "all", 3, 2)], [SimilarityConfig(t) for t in THRESHOLDS])
        for t in THRESHOLDS:
            s = compare(reports, t, alg)
            sums.append(s.n_better + s.n_equal + s.n_worse)
    elapsed = time.perf_counter() - start
    ok = set(sums) == {12} and elapsed < 1
    accept(4, "better/equal/worse trichotomy", ok,
           f"{len(sums)} (algorithm, threshold) rows, totals {sorted(set(sums))} for 12 classes, "
           f"{elapsed:.2f}s (limit 1s)")
    assert ok


def _best_sse(X, y):
    best = math.inf
    for f in range(X.shape[1]):
        for thr in np.unique(X[:, f])[:-1]:
            left = X[:, f] <= thr
            sse = ((y[left] - y[left].mean()) ** 2).sum() + ((y[~left] - y[~left].mean()) ** 2).sum()
            best = min(best, sse)
    return best


def test_05_stump_oracle(accept):
    start = time.perf_counter()
    rng = np.random.default_rng(5)
    worst, mismatched = 0.0, 0
    for i in range(200):
        n, K = int(rng.integers(2, 21)), int(rng.integers(1, 5))
        X = rng.normal(size=(n, K))
        if i % 4 == 0:
            X = np.round(X)  # repeated feature values
        y = rng.normal(size=n)
        tree = fit_tree(X, y, HyperParams(1, "all", 1, 2), seed=i)
        oracle = _best_sse(X, y)
        if tree.feature[0] < 0:
            mismatched += math.isfinite(oracle)
            continue
        leaf = tree.apply(X)
        sse = sum(((y[leaf == v] - y[leaf == v].mean()) ** 2).sum() for v in np.unique(leaf))
        worst = max(worst, abs(sse - oracle))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-9 and mismatched == 0 and elapsed < 10
    accept(5, "stump oracle", ok,
           f"200 datasets, max |tree SSE - exhaustive SSE| = {worst:.2e}, {mismatched} missed splits, "
           f"{elapsed:.2f}s (limits 1e-9, 10s)")
    assert ok


def test_06_lopo_exclusivity(accept):
    start = time.perf_counter()
    vectors, records = synthetic_sources()
    cfg = ExperimentConfig(portfolios=[10, 30], importance_repeats=1, master_seed=6,
                           grid={"n_estimators": [10], "max_features": ["all"], "max_depth": [3],
                                 "min_samples_split": [2]})
    bundle, queries, _ = experiment(records, vectors, cfg)
    violations, checked = [], 0
    for alg in bundle["algorithms"]:
        for port in alg["portfolios"]:
            for fold in port["folds"]:
                c = fold["held_out_class"]
                checked += 1
                if c in fold["train_classes"] or len(fold["train_classes"]) != 11:
                    violations.append((alg["algorithm_id"], port["label"], c, "train"))
                if any(c in cls for cls in fold["neighbor_classes"].values()):
                    violations.append((alg["algorithm_id"], port["label"], c, "neighbor"))
    for q in queries:
        if any(n["class_id"] == q["class_id"] for n in q["neighbors"]):
            violations.append(("query", q["class_id"], q["instance_id"]))
    for f in make_lopo_folds(synthetic_dataset()):
        if set(f.train) & set(f.test):
            violations.append(("indices", f.held_out_class))
    elapsed = time.perf_counter() - start
    ok = not violations and checked == 3 * 2 * 12 and elapsed < 5
    accept(6, "LOPO exclusivity", ok,
           f"{checked} folds and {len(queries)} queries checked, {len(violations)} violations, "
           f"{elapsed:.2f}s (limit 5s)")
    assert ok


def test_07_duplicate_class_improves(accept):
    start = time.perf_counter()
    rng = np.random.default_rng(7)
    names = [f"f{j}" for j in range(15)]
    rows = []
    for c in range(1, 6):
        for i in range(1, 4):
            x = 0.05 * rng.uniform(size=15)
            x[(c - 1) * 3 + (i - 1)] += 1.0  # every training instance points its own way
            rows.append(Row("dup", c, i, dict(zip(names, x.tolist())), float(rng.normal(0, 3))))
    rows += [Row("dup", 6, r.instance_id, dict(r.features), r.target) for r in rows if r.class_id == 5]
    ds = Dataset(rows, names)
    fold = make_lopo_folds(ds)[-1]
    rep = run_lopo(ds, [HyperParams(1, "all", 3, 2)], [SimilarityConfig(0.9)], seed=0)[-1]
    assert rep.held_out_class == fold.held_out_class == 6
    raw_mae, clust_mae = mae(rep.rf_abs_errors), mae(rep.rfclust_abs_errors[0.9])
    only_dup = rep.neighbor_classes[0.9] == [5] and rep.neighbor_counts[0.9] == [1, 1, 1]
    assert raw_mae > 0, "precondition: the weak forest must err on the duplicated class"
    assert only_dup, "precondition: neighbours come from the duplicated class only"
    elapsed = time.perf_counter() - start
    ok = clust_mae < raw_mae and abs(clust_mae - raw_mae / 2) <= 1e-12 and elapsed < 30
    accept(7, "duplicate-class improvement", ok,
           f"held-out class 6: RF MAE {raw_mae:.4f}, RF+clust@0.9 MAE {clust_mae:.4f} "
           f"(ratio {clust_mae / raw_mae:.6f}), {elapsed:.2f}s (limit 30s)")
    assert ok


def test_08_de_sanity(accept):
    start = time.perf_counter()
    sphere = make_instance(make_class(1, "sphere", 10), 0)
    cfg = named_config("de1", dimension=10, budget_factor=500, runs=30, seed=0)
    assert cfg.population_size == 10 and cfg.budget == 5000
    traces = de_traces(cfg, sphere, range(30))
    median = float(np.median(traces[:, -1]))
    monotone = bool(np.all(np.diff(traces, axis=1) <= 0))
    elapsed = time.perf_counter() - start
    ok = median < DE_BOUND and monotone and elapsed < 60
    accept(8, "DE sanity on the sphere", ok,
           f"median precision {median:.4e} < bound {DE_BOUND:.4e}, monotone best-so-far: {monotone}, "
           f"{elapsed:.2f}s (limit 60s)")
    assert ok


GROUPS = ("distr", "meta", "disp", "ic", "nbc", "pca")


def test_09_feature_invariances(accept):
    start = time.perf_counter()
    inst = suite_instances("classic12-multi5", 5)[17]
    X = lhs_sample(250, 5, (inst.problem.lower, inst.problem.upper), "LHS", np.random.default_rng(9))
    y = evaluate_batch(inst, X)
    base, shifted, scaled = F.all_features(X, y), F.all_features(X, y + 100), F.all_features(X, 3 * y)
    close = lambda a, b: math.isclose(a, b, rel_tol=1e-9, abs_tol=1e-9)
    shift_bad = [n for n in F.FEATURE_NAMES if n != "meta_lin_intercept" and not close(base[n], shifted[n])]
    intercept_moved = abs(shifted["meta_lin_intercept"] - base["meta_lin_intercept"] - 100) < 1e-6
    scale_bad = [n for n in F.SCALE_INVARIANT if not close(base[n], scaled[n])]
    covered = {g: sum(n.startswith(g + "_") for n in F.SCALE_INVARIANT) for g in GROUPS}
    elapsed = time.perf_counter() - start
    ok = not shift_bad and intercept_moved and not scale_bad and all(covered.values()) and elapsed < 10
    accept(9, "feature invariances", ok,
           f"shift +100 changed {shift_bad or 'only meta_lin_intercept'}; scale x3 changed "
           f"{scale_bad or 'none'} of {len(F.SCALE_INVARIANT)} scale-invariant features "
           f"(per group {covered}); {elapsed:.2f}s (tolerance 1e-9)")
    assert ok


@pytest.mark.slow
def test_10_end_to_end_determinism(accept, tmp_path):
    config = tmp_path / "config.json"
    config.write_text(json.dumps({"sample_factor": 100, "master_seed": 2024}))
    runs = []
    start = time.perf_counter()
    for name in ("a", "b"):
        out = tmp_path / name
        t0 = time.perf_counter()
        subprocess.run([sys.executable, "-m", "rfclust.cli", "experiment", "--config", str(config),
                        "--out", str(out)], check=True, capture_output=True)
        runs.append((out, time.perf_counter() - t0))
    elapsed = time.perf_counter() - start
    files_a = sorted(p.relative_to(runs[0][0]) for p in runs[0][0].rglob("*") if p.is_file())
    files_b = sorted(p.relative_to(runs[1][0]) for p in runs[1][0].rglob("*") if p.is_file())
    differing = [str(p) for p in files_a if (runs[0][0] / p).read_bytes() != (runs[1][0] / p).read_bytes()]
    ok = files_a == files_b and not differing and len(files_a) > 0 and elapsed <= 600
    accept(10, "end-to-end determinism", ok,
           f"{len(files_a)} files, {len(differing)} differ, runs took {runs[0][1]:.0f}s and "
           f"{runs[1][1]:.0f}s ({elapsed:.0f}s total, limit 600s)")
    assert ok
