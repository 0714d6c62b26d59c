"""Command-line entry point: ``rfclust <command> ...``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import __version__, io
from .benchmark import SUITES, suite_instances, write_suite_csv
from .config import ExperimentConfig, load_config
from .landscape.sampling import SAMPLERS
from .lopo import join_dataset, similarity_diagnostics
from .pipeline import (
    DIAG_COLUMNS,
    extract_features,
    optimize,
    run_experiment,
    targets_for,
    write_experiment,
    experiment as run_bundle,
)
from .report import render
from .similarity_calibration import AGGREGATIONS, NORMALIZATIONS, SimilarityConfig

log = logging.getLogger("rfclust")

# flag dest -> ExperimentConfig field, for flags that feed the config
_CONFIG_FLAGS = {
    "suite": "suite", "dimension": "dimension", "algs": "algorithms",
    "budget_factor": "budget_factor", "runs": "runs", "sample_factor": "sample_factor",
    "reps": "repetitions", "sampler": "sampler", "thresholds": "thresholds",
    "portfolios": "portfolios", "aggregation": "aggregation", "normalize": "normalize",
    "seed": "master_seed", "instance_seed": "instance_seed",
}


def _csv_list(kind):
    def parse(text):
        try:
            return [kind(x) for x in text.split(",") if x.strip()]
        except ValueError as exc:
            raise argparse.ArgumentTypeError(str(exc)) from None
    return parse


def _add_common(p, *, suite=True):
    if suite:
        p.add_argument("--suite", choices=sorted(SUITES))
        p.add_argument("--dimension", type=int)
        p.add_argument("--instance-seed", type=int, help="seed of the instance transforms")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--config", type=Path, help="JSON config; its keys override flags")
    p.add_argument("--jobs", type=int, default=1, help="worker processes")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rfclust", description=__doc__)
    parser.add_argument("--version", action="version", version=f"rfclust {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    suite = sub.add_parser("suite", help="inspect benchmark suites")
    suite_sub = suite.add_subparsers(dest="suite_command", required=True)
    sl = suite_sub.add_parser("list", help="list suites or dump one suite's instances")
    sl.add_argument("--name", choices=sorted(SUITES))
    sl.add_argument("--dimension", type=int, default=10)
    sl.add_argument("--instance-seed", type=int, default=0)
    sl.add_argument("--format", choices=("csv", "text"), default="text")

    opt = sub.add_parser("optimize", help="run the DE configurations on a suite")
    _add_common(opt)
    opt.add_argument("--algs", type=_csv_list(str))
    opt.add_argument("--budget-factor", type=int)
    opt.add_argument("--runs", type=int)
    opt.add_argument("--out", type=Path, required=True)

    feat = sub.add_parser("features", help="compute landscape features for a suite")
    _add_common(feat)
    feat.add_argument("--sample-factor", type=int)
    feat.add_argument("--reps", type=int)
    feat.add_argument("--sampler", choices=SAMPLERS)
    feat.add_argument("--out", type=Path, required=True)

    exp = sub.add_parser("experiment", help="feature selection and LOPO runs for RF and RF+clust")
    _add_common(exp)
    exp.add_argument("--perf", type=Path, help="per-run performance CSV (computed if omitted)")
    exp.add_argument("--features", type=Path, help="features CSV (computed if omitted)")
    exp.add_argument("--algs", type=_csv_list(str))
    exp.add_argument("--budget-factor", type=int)
    exp.add_argument("--runs", type=int)
    exp.add_argument("--sample-factor", type=int)
    exp.add_argument("--reps", type=int)
    exp.add_argument("--sampler", choices=SAMPLERS)
    exp.add_argument("--thresholds", type=_csv_list(float))
    exp.add_argument("--portfolios", type=_csv_list(int))
    exp.add_argument("--aggregation", choices=AGGREGATIONS)
    exp.add_argument("--normalize", choices=NORMALIZATIONS)
    exp.add_argument("--out", type=Path, required=True, help="output directory")

    diag = sub.add_parser("diagnose", help="similarity vs performance gap for one class")
    diag.add_argument("--perf", type=Path, required=True)
    diag.add_argument("--features", type=Path, required=True)
    diag.add_argument("--alg", required=True)
    diag.add_argument("--focus-class", type=int, required=True)
    diag.add_argument("--experiment", type=Path,
                      help="experiment directory whose selected portfolio to use")
    diag.add_argument("--top", type=int, help="portfolio size to take from --experiment")
    diag.add_argument("--normalize", choices=NORMALIZATIONS, default="min_max_on_train")
    diag.add_argument("--seed", type=int, default=0)
    diag.add_argument("--out", type=Path, required=True)

    rep = sub.add_parser("report", help="render tables from an experiment directory")
    rep.add_argument("--experiment", type=Path, required=True)
    rep.add_argument("--format", choices=("csv", "markdown"), default="csv")
    rep.add_argument("--out", type=Path, help="output directory (default: the experiment directory)")
    return parser


def _config_from(args) -> ExperimentConfig:
    overrides = {}
    for dest, key in _CONFIG_FLAGS.items():
        value = getattr(args, dest, None)
        if value is not None:
            overrides[key] = value
    if getattr(args, "config", None) is not None:
        return load_config(args.config, overrides)
    return ExperimentConfig.from_dict(overrides)


def _cmd_suite(args) -> int:
    if args.name is None:
        for name, classes in SUITES.items():
            print(f"{name}\tinstances per class: {len(classes)}")
        return 0
    instances = suite_instances(args.name, args.dimension, args.instance_seed)
    if args.format == "csv":
        write_suite_csv(sys.stdout, args.name, instances)
    else:
        for inst in instances:
            print(f"{inst.class_id}\t{inst.problem.name}\tinstance {inst.instance_id}"
                  f"\tyshift {inst.y_shift!r}")
    return 0


def _cmd_optimize(args) -> int:
    cfg = _config_from(args)
    paths = io.write_performance(args.out, cfg.master_seed, optimize(cfg, args.jobs))
    print("\n".join(str(p) for p in paths))
    return 0


def _cmd_features(args) -> int:
    cfg = _config_from(args)
    print(io.write_features(args.out, cfg.master_seed, extract_features(cfg, args.jobs)))
    return 0


def _cmd_experiment(args) -> int:
    cfg = _config_from(args)
    out = args.out
    if args.perf is not None and args.features is not None:
        written = run_experiment(args.perf, args.features, cfg, out, args.jobs)
    else:
        out.mkdir(parents=True, exist_ok=True)
        if args.perf is not None:
            records = io.read_performance(args.perf)
        else:
            records = optimize(cfg, args.jobs)
            io.write_performance(out / "perf.csv", cfg.master_seed, records)
        if args.features is not None:
            vectors = io.read_features(args.features)
        else:
            vectors = extract_features(cfg, args.jobs)
            io.write_features(out / "features.csv", cfg.master_seed, vectors)
        bundle, queries, diagnostics = run_bundle(records, vectors, cfg, args.jobs)
        written = write_experiment(out, cfg, bundle, queries, diagnostics)
    print(f"wrote {len(written)} files to {out}")
    return 0


def _cmd_diagnose(args) -> int:
    records = io.read_performance(args.perf)
    vectors = io.read_features(args.features)
    names = sorted(vectors[0].values) if vectors else []
    if args.experiment is not None:
        bundle = io.read_json(args.experiment / "experiment.json")
        alg = next((a for a in bundle["algorithms"] if a["algorithm_id"] == args.alg), None)
        if alg is None:
            raise ValueError(f"{args.experiment}: no algorithm {args.alg!r}")
        ports = alg["portfolios"]
        port = next((p for p in ports if args.top is None or p["size"] == args.top), None)
        if port is None:
            raise ValueError(f"{args.experiment}: no portfolio top{args.top} for {args.alg}")
        names = port["features"]
    ds = join_dataset(vectors, targets_for(records, args.alg), names)
    pairs = similarity_diagnostics(ds, args.focus_class, None,
                                   SimilarityConfig(-1.0, normalize=args.normalize))
    rows = [(args.alg, f"top{len(names)}", p.focus_instance, p.other_class, p.other_instance,
             p.similarity, p.performance_gap) for p in pairs]
    print(io.write_csv(args.out, args.seed, DIAG_COLUMNS, rows))
    return 0


def _cmd_report(args) -> int:
    bundle = io.read_json(args.experiment / "experiment.json")
    for p in render(bundle, args.out or args.experiment, args.format):
        print(p)
    return 0


COMMANDS = {"suite": _cmd_suite, "optimize": _cmd_optimize, "features": _cmd_features,
            "experiment": _cmd_experiment, "diagnose": _cmd_diagnose, "report": _cmd_report}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except FileNotFoundError as exc:
        print(f"rfclust: error: file not found: {exc.filename}", file=sys.stderr)
    except (OSError, ValueError, KeyError) as exc:
        print(f"rfclust: error: {exc}", file=sys.stderr)
    return 1


if __name__ == "__main__":
    sys.exit(main())
