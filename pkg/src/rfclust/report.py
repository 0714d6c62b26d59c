"""Tables rendered from an experiment bundle, as CSV files or one markdown file."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from . import __version__
from . import io
from .lopo import FoldReport, compare, mae

HEATMAP_KEYS = ["algorithm_id", "portfolio", "model"]
COMPARISON_COLUMNS = ["algorithm_id", "threshold", "portfolio", "n_better", "n_equal", "n_worse"]
MAE_COLUMNS = ["algorithm_id", "top_features", "aggregation", "mae_train", "mae_test"]


def _reports(portfolio: dict) -> list[FoldReport]:
    return [FoldReport.from_dict(f) for f in portfolio["folds"]]


def check_complete(bundle: dict) -> None:
    """Raise naming the first (algorithm, portfolio, threshold, class) combination that is missing."""
    cfg = bundle["config"]
    classes = bundle["classes"]
    thresholds = [float(t) for t in cfg["thresholds"]]
    algs = {a["algorithm_id"]: a for a in bundle["algorithms"]}
    for alg in cfg["algorithms"]:
        if alg not in algs:
            raise ValueError(f"bundle is missing algorithm {alg}")
        ports = {p["size"]: p for p in algs[alg]["portfolios"]}
        for size in cfg["portfolios"]:
            if size not in ports:
                raise ValueError(f"bundle is missing algorithm {alg}, portfolio top{size}")
            folds = {f["held_out_class"]: f for f in ports[size]["folds"]}
            for c in classes:
                if c not in folds:
                    raise ValueError(f"bundle is missing algorithm {alg}, portfolio top{size}, class {c}")
                have = {float(t) for t in folds[c]["rfclust_abs_errors"]}
                for t in thresholds:
                    if t not in have:
                        raise ValueError(f"bundle is missing algorithm {alg}, portfolio top{size}, "
                                         f"threshold {t}, class {c}")


def tables(bundle: dict) -> dict[str, tuple[list[str], list[list]]]:
    """All report tables as ``name -> (columns, rows)``."""
    check_complete(bundle)
    cfg = bundle["config"]
    classes = bundle["classes"]
    thresholds = [float(t) for t in cfg["thresholds"]]
    cls_cols = [str(c) for c in classes]
    errors, neighbors, comparison, summary = [], [], [], []
    for alg in bundle["algorithms"]:
        aid = alg["algorithm_id"]
        for port in alg["portfolios"]:
            label = port["label"]
            by_class = {r.held_out_class: r for r in _reports(port)}
            reps = [by_class[c] for c in classes]
            errors.append([aid, label, "RF"] + [mae(r.rf_abs_errors) for r in reps])
            for t in thresholds:
                model = f"RF+clust@{t!r}"
                errors.append([aid, label, model] + [mae(r.rfclust_abs_errors[t]) for r in reps])
                neighbors.append([aid, label, model] + [int(sum(r.neighbor_counts[t])) for r in reps])
                s = compare(reps, t, aid, label)
                comparison.append([aid, t, label, s.n_better, s.n_equal, s.n_worse])
            pooled = np.concatenate([r.rf_abs_errors for r in reps])
            summary.append([aid, port["size"], cfg["target_statistic"],
                            float(np.mean([r.train_mae for r in reps])), mae(pooled)])
    return {
        "errors_heatmap": (HEATMAP_KEYS + cls_cols, errors),
        "neighbors_heatmap": (HEATMAP_KEYS + cls_cols, neighbors),
        "comparison": (COMPARISON_COLUMNS, comparison),
        "mae_summary": (MAE_COLUMNS, summary),
    }


def render_csv(bundle: dict, out_dir: str | Path, seed: int) -> list[Path]:
    out = Path(out_dir)
    return [io.write_csv(out / f"{name}.csv", seed, cols, rows)
            for name, (cols, rows) in tables(bundle).items()]


def _md_table(columns, rows) -> list[str]:
    lines = ["| " + " | ".join(columns) + " |", "|" + "---|" * len(columns)]
    lines += ["| " + " | ".join(io.fmt(v) for v in row) + " |" for row in rows]
    return lines


def render_markdown(bundle: dict, out_dir: str | Path, seed: int) -> list[Path]:
    """One ``report.md`` holding the same numbers as the CSV variant."""
    titles = {
        "errors_heatmap": "Fold MAE per held-out class",
        "neighbors_heatmap": "Neighbours found per held-out class",
        "comparison": "Better / equal / worse counts",
        "mae_summary": "Train and test MAE of the forest",
    }
    lines = [f"<!-- rfclust {__version__} seed={seed} -->", "# RF+clust experiment report", ""]
    for name, (cols, rows) in tables(bundle).items():
        lines += [f"## {titles[name]}", ""] + _md_table(cols, rows) + [""]
    path = Path(out_dir) / "report.md"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines))
    return [path]


def render(bundle: dict, out_dir: str | Path, fmt: str = "csv") -> list[Path]:
    seed = bundle["seeds"]["master"]
    if fmt == "csv":
        return render_csv(bundle, out_dir, seed)
    if fmt == "markdown":
        return render_markdown(bundle, out_dir, seed)
    raise ValueError(f"unknown report format {fmt!r}")
