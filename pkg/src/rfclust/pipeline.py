"""The pipeline stages: optimise, extract features, run the LOPO experiment."""

from __future__ import annotations

import logging
import warnings
from pathlib import Path
from typing import Sequence

import numpy as np

from . import io
from ._parallel import mapper as make_mapper
from .benchmark import ProblemInstance, suite_instances
from .config import ExperimentConfig
from .de import DEConfig, PerformanceRecord, de_traces, log_precision
from .landscape.extract import FeatureVector, SampleDesign, compute_suite_features
from .landscape.features import FEATURE_NAMES
from .lopo import (
    FoldReport,
    fold_importances,
    join_dataset,
    run_lopo,
    similarity_diagnostics,
)
from .report import render_csv
from .similarity_calibration import SimilarityConfig
from .tuning import rank_features

log = logging.getLogger(__name__)


def instances_for(config: ExperimentConfig) -> list[ProblemInstance]:
    return suite_instances(config.suite, config.dimension, config.instance_seed,
                           config.rotated_classes)


class _InstanceJob:
    def __init__(self, de_config: DEConfig):
        self.de_config = de_config

    def __call__(self, inst: ProblemInstance) -> list[float]:
        return de_traces(self.de_config, inst, range(self.de_config.runs))[:, -1].tolist()


def optimize(config: ExperimentConfig, jobs: int = 1) -> list[PerformanceRecord]:
    """Fixed-budget DE runs for every configured algorithm on every suite instance."""
    instances = instances_for(config)
    mapper = make_mapper(jobs)
    records = []
    for alg in config.algorithms:
        de_cfg = config.de_config(alg)
        per_instance = mapper(_InstanceJob(de_cfg), instances)
        for inst, runs in zip(instances, per_instance):
            records.append(PerformanceRecord(alg, config.suite, inst.class_id,
                                             inst.instance_id, runs))
        log.info("optimised %s on %d instances", alg, len(instances))
    return records


def extract_features(config: ExperimentConfig, jobs: int = 1) -> list[FeatureVector]:
    design = SampleDesign.scaled(config.dimension, config.sample_factor,
                                 repetitions=config.repetitions, sampler=config.sampler,
                                 seed=config.features_seed)
    return compute_suite_features(instances_for(config), design, config.suite, make_mapper(jobs))


def targets_for(records: Sequence[PerformanceRecord], algorithm_id: str,
                statistic: str = "median") -> dict[tuple[int, int], float]:
    """log10 of the per-instance run statistic, keyed by (class_id, instance_id)."""
    out = {}
    for r in records:
        if r.algorithm_id != algorithm_id:
            continue
        value = r.median_precision if statistic == "median" else float(np.mean(r.run_precisions))
        out[(r.class_id, r.instance_id)] = log_precision(value)
    if not out:
        raise ValueError(f"no performance records for algorithm {algorithm_id!r}")
    return out


def portfolio_label(size: int) -> str:
    return f"top{size}"


def _strip_queries(report: FoldReport) -> dict:
    d = report.to_dict()
    d.pop("queries")
    return d


def experiment(records: Sequence[PerformanceRecord], vectors: Sequence[FeatureVector],
               config: ExperimentConfig, jobs: int = 1):
    """Feature selection, then LOPO runs per portfolio, for every algorithm.

    Returns ``(bundle, queries, diagnostics)``. ``bundle`` is the JSON-ready
    record of everything the reports need. ``queries`` holds the per-query
    records in canonical order. ``diagnostics`` maps a class id to its
    scatter rows.
    """
    mapper = make_mapper(jobs)
    grid = config.hyper_grid()
    sims = config.similarity_configs()
    # diagnostics list every pair, so only the scaling mode matters here
    diag_cfg = SimilarityConfig(-1.0, config.aggregation, config.normalize)
    seed = config.model_seed
    algorithms, queries = [], []
    diagnostics: dict[int, list] = {}
    names = [n for n in FEATURE_NAMES if all(n in v.values for v in vectors)]
    for alg in config.algorithms:
        full = join_dataset(vectors, targets_for(records, alg, config.target_statistic), names)
        importances = fold_importances(full, grid, seed, config.importance_repeats, mapper)
        ranking = rank_features(importances)
        entry = {"algorithm_id": alg,
                 "importance": [[n, v] for n, v in ranking],
                 "portfolios": []}
        for size in config.portfolios:
            label = portfolio_label(size)
            if size > len(ranking):
                warnings.warn(f"portfolio {label} exceeds the {len(ranking)} available features")
            chosen = [n for n, _ in ranking[:size]]
            ds = full.with_portfolio(chosen)
            reports = run_lopo(ds, grid, sims, seed, mapper)
            entry["portfolios"].append({"label": label, "size": size, "features": chosen,
                                        "folds": [_strip_queries(r) for r in reports]})
            for r in reports:
                for q in r.queries:
                    queries.append({"algorithm_id": alg, "portfolio": label, **q})
            for c in ds.classes:
                for p in similarity_diagnostics(ds, c, None, diag_cfg):
                    diagnostics.setdefault(c, []).append(
                        (alg, label, p.focus_instance, p.other_class, p.other_instance,
                         p.similarity, p.performance_gap))
            log.info("%s %s: %d folds done", alg, label, len(reports))
        algorithms.append(entry)
    bundle = {
        "config": config.to_dict(),
        "seeds": {"master": config.master_seed, "optimize": config.optimize_seed,
                  "features": config.features_seed, "model": seed,
                  "instances": config.instance_seed},
        "classes": sorted({v.class_id for v in vectors}),
        "algorithms": algorithms,
    }
    return bundle, queries, diagnostics


DIAG_COLUMNS = ["algorithm_id", "portfolio", "focus_instance", "other_class", "other_instance",
                "similarity", "performance_gap"]


def write_experiment(out_dir: str | Path, config: ExperimentConfig, bundle: dict,
                     queries: list[dict], diagnostics: dict) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    seed = config.master_seed
    written = [io.write_json(out / "experiment.json", seed, bundle),
               io.write_jsonl(out / "queries.jsonl", seed, queries)]
    for alg in bundle["algorithms"]:
        rows = [(name, float(score), rank) for rank, (name, score) in enumerate(alg["importance"], 1)]
        written.append(io.write_csv(out / f"importance_{alg['algorithm_id']}.csv", seed,
                                    ["feature", "summed_importance", "rank"], rows))
    for c in sorted(diagnostics):
        written.append(io.write_csv(out / f"diagnostics_{c}.csv", seed, DIAG_COLUMNS, diagnostics[c]))
    written += render_csv(bundle, out, seed)
    return written


def run_experiment(perf_csv: str | Path, features_csv: str | Path, config: ExperimentConfig,
                   out_dir: str | Path, jobs: int = 1) -> list[Path]:
    """Read the staged inputs, run the experiment and write every output file."""
    records = io.read_performance(perf_csv)
    vectors = io.read_features(features_csv)
    bundle, queries, diagnostics = experiment(records, vectors, config, jobs)
    return write_experiment(out_dir, config, bundle, queries, diagnostics)
