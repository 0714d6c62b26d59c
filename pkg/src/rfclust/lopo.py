"""Leave-one-problem-out evaluation of the random forest and its calibrated variant."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from ._seeding import derive_seed, rng_for
from .forest import HyperParams, fit_forest
from .similarity_calibration import (
    SimilarityConfig,
    calibrate,
    neighbors_at,
    normalize_features,
    query_record,
    similarity_row,
)
from .tuning import grid_search, permutation_importance

Mapper = Callable[[Callable, Iterable], Iterable]


@dataclass(frozen=True)
class Row:
    suite: str
    class_id: int
    instance_id: int
    features: Mapping[str, float]
    target: float

    @property
    def key(self) -> tuple[int, int]:
        return (self.class_id, self.instance_id)


class Dataset:
    """Feature vectors joined with one algorithm's log-precision targets.

    Rows are kept sorted by (class_id, instance_id); ``portfolio`` fixes the
    feature columns used for both regression and similarity.
    """

    def __init__(self, rows: Sequence[Row], portfolio: Sequence[str]):
        rows = sorted(rows, key=lambda r: r.key)
        keys = [r.key for r in rows]
        if len(set(keys)) != len(keys):
            dupes = sorted({k for k in keys if keys.count(k) > 1})
            raise ValueError(f"duplicate (class_id, instance_id) rows: {dupes}")
        portfolio = list(portfolio)
        for r in rows:
            missing = [n for n in portfolio if n not in r.features]
            if missing:
                raise ValueError(f"row {r.key} lacks feature {missing[0]!r}")
        self.rows = rows
        self.portfolio = portfolio
        self.X = np.array([[r.features[n] for n in portfolio] for r in rows], dtype=float)
        self.X = self.X.reshape(len(rows), len(portfolio))
        self.y = np.array([r.target for r in rows], dtype=float)
        self.class_ids = np.array([r.class_id for r in rows], dtype=int)
        self.instance_ids = np.array([r.instance_id for r in rows], dtype=int)

    def __len__(self) -> int:
        return len(self.rows)

    @property
    def keys(self) -> list[tuple[int, int]]:
        return [r.key for r in self.rows]

    @property
    def classes(self) -> list[int]:
        return sorted(set(self.class_ids.tolist()))

    def with_portfolio(self, names: Sequence[str]) -> "Dataset":
        return Dataset(self.rows, names)


def join_dataset(feature_vectors, targets: Mapping[tuple[int, int], float],
                 portfolio: Sequence[str]) -> Dataset:
    """Pair feature vectors with targets keyed by (class_id, instance_id).

    Both sides must cover the same instances; otherwise the error lists the
    keys present on only one side.
    """
    fkeys = {(v.class_id, v.instance_id) for v in feature_vectors}
    tkeys = set(targets)
    if fkeys != tkeys:
        only_f = sorted(fkeys - tkeys)
        only_t = sorted(tkeys - fkeys)
        raise ValueError(f"instance sets differ: only in features {only_f}; "
                         f"only in performance {only_t}")
    rows = [Row(v.suite, v.class_id, v.instance_id, v.values, float(targets[(v.class_id, v.instance_id)]))
            for v in feature_vectors]
    return Dataset(rows, portfolio)


@dataclass(frozen=True)
class Fold:
    held_out_class: int
    train: np.ndarray
    test: np.ndarray


def make_lopo_folds(dataset: Dataset) -> list[Fold]:
    classes = dataset.classes
    if len(classes) < 2:
        raise ValueError("leave-one-problem-out needs at least two problem classes")
    return [Fold(c, np.nonzero(dataset.class_ids != c)[0], np.nonzero(dataset.class_ids == c)[0])
            for c in classes]


def mae(errors) -> float:
    errors = np.asarray(errors, dtype=float)
    if errors.size == 0:
        raise ValueError("mae of an empty error list")
    return float(np.mean(np.abs(errors)))


@dataclass
class FoldReport:
    held_out_class: int
    instance_ids: list[int]
    targets: list[float]
    rf_predictions: list[float]
    rf_abs_errors: list[float]
    rfclust_predictions: dict[float, list[float]]
    rfclust_abs_errors: dict[float, list[float]]
    neighbor_counts: dict[float, list[int]]
    tuned_params: HyperParams
    train_mae: float
    train_classes: list[int] = field(default_factory=list)
    neighbor_classes: dict[float, list[int]] = field(default_factory=dict)
    queries: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        out = asdict(self)
        for key in ("rfclust_predictions", "rfclust_abs_errors", "neighbor_counts", "neighbor_classes"):
            out[key] = {repr(t): v for t, v in getattr(self, key).items()}
        return out

    @classmethod
    def from_dict(cls, d: Mapping) -> "FoldReport":
        d = dict(d)
        for key in ("rfclust_predictions", "rfclust_abs_errors", "neighbor_counts", "neighbor_classes"):
            d[key] = {float(t): v for t, v in d.get(key, {}).items()}
        d["tuned_params"] = HyperParams(**d["tuned_params"])
        return cls(**d)


def _fold_seeds(seed: int, held_out_class: int) -> tuple[int, int]:
    return derive_seed(seed, held_out_class, 0), derive_seed(seed, held_out_class, 1)


def run_fold(dataset: Dataset, fold: Fold, grid: Sequence[HyperParams],
             sim_configs: Sequence[SimilarityConfig], seed: int = 0) -> FoldReport:
    """Tune, fit and predict one held-out class, then calibrate at every threshold.

    Neighbour retrieval and its feature scaling only ever see the training
    rows of the fold.
    """
    Xtr, ytr = dataset.X[fold.train], dataset.y[fold.train]
    Xte, yte = dataset.X[fold.test], dataset.y[fold.test]
    groups = dataset.class_ids[fold.train]
    tune_seed, fit_seed = _fold_seeds(seed, fold.held_out_class)
    params = grid_search(Xtr, ytr, groups, grid, seed=tune_seed)
    forest = fit_forest(Xtr, ytr, params, seed=fit_seed, feature_names=dataset.portfolio)
    raw = forest.predict(Xte)
    train_mae = mae(forest.predict(Xtr) - ytr)

    train_keys = [dataset.keys[i] for i in fold.train]
    scaled = {}
    for cfg in sim_configs:
        if cfg.normalize not in scaled:
            scaled[cfg.normalize] = normalize_features(Xtr, Xte, cfg.normalize)

    report = FoldReport(
        held_out_class=fold.held_out_class,
        instance_ids=dataset.instance_ids[fold.test].tolist(),
        targets=yte.tolist(),
        rf_predictions=raw.tolist(),
        rf_abs_errors=np.abs(raw - yte).tolist(),
        rfclust_predictions={}, rfclust_abs_errors={}, neighbor_counts={},
        tuned_params=params, train_mae=train_mae,
        train_classes=sorted(set(groups.tolist())),
    )
    for cfg in sim_configs:
        train_n, test_n = scaled[cfg.normalize]
        finals, errs, counts, seen = [], [], [], set()
        for q, row_idx in enumerate(fold.test):
            sims = similarity_row(test_n[q], train_n)
            nbrs = neighbors_at(sims, ytr, cfg.threshold)
            pred = calibrate(raw[q], nbrs, cfg.aggregation)
            finals.append(pred.final)
            errs.append(abs(pred.final - yte[q]))
            counts.append(nbrs.k)
            seen.update(train_keys[e.train_index][0] for e in nbrs.entries)
            row = dataset.rows[row_idx]
            report.queries.append(query_record(row.suite, row.class_id, row.instance_id,
                                               cfg.threshold, nbrs, train_keys, pred))
        report.rfclust_predictions[cfg.threshold] = finals
        report.rfclust_abs_errors[cfg.threshold] = errs
        report.neighbor_counts[cfg.threshold] = counts
        report.neighbor_classes[cfg.threshold] = sorted(seen)
    return report


def run_lopo(dataset: Dataset, grid: Sequence[HyperParams], sim_configs: Sequence[SimilarityConfig],
             seed: int = 0, mapper: Mapper = map) -> list[FoldReport]:
    folds = make_lopo_folds(dataset)
    return list(mapper(_FoldJob(dataset, grid, sim_configs, seed), folds))


class _FoldJob:
    """Picklable closure so folds can run in worker processes."""

    def __init__(self, dataset, grid, sim_configs, seed):
        self.dataset, self.grid, self.sim_configs, self.seed = dataset, grid, sim_configs, seed

    def __call__(self, fold: Fold) -> FoldReport:
        return run_fold(self.dataset, fold, self.grid, self.sim_configs, self.seed)


class _ImportanceJob:
    def __init__(self, dataset, grid, seed, repeats):
        self.dataset, self.grid, self.seed, self.repeats = dataset, grid, seed, repeats

    def __call__(self, fold: Fold) -> dict[str, float]:
        ds = self.dataset
        Xtr, ytr = ds.X[fold.train], ds.y[fold.train]
        tune_seed, fit_seed = _fold_seeds(self.seed, fold.held_out_class)
        params = grid_search(Xtr, ytr, ds.class_ids[fold.train], self.grid, seed=tune_seed)
        forest = fit_forest(Xtr, ytr, params, seed=fit_seed, feature_names=ds.portfolio)
        rng = rng_for(self.seed, fold.held_out_class, 2)
        return permutation_importance(forest, Xtr, ytr, self.repeats, rng)


def fold_importances(dataset: Dataset, grid: Sequence[HyperParams], seed: int = 0,
                     repeats: int = 5, mapper: Mapper = map) -> list[dict[str, float]]:
    """Permutation importance of each LOPO fold's tuned forest, on that fold's training rows."""
    return list(mapper(_ImportanceJob(dataset, grid, seed, repeats), make_lopo_folds(dataset)))


@dataclass(frozen=True)
class ComparisonSummary:
    algorithm_id: str
    threshold: float
    portfolio: str
    n_better: int
    n_equal: int
    n_worse: int


def compare(reports: Sequence[FoldReport], threshold: float, algorithm_id: str = "",
            portfolio: str = "") -> ComparisonSummary:
    """Count classes where calibration lowers, keeps or raises the fold MAE.

    "Equal" means bitwise-equal MAE, which in practice happens only when no
    query of the class found a neighbour.
    """
    better = equal = worse = 0
    for rep in reports:
        rf = mae(rep.rf_abs_errors)
        rc = mae(rep.rfclust_abs_errors[threshold])
        if rc < rf:
            better += 1
        elif rc == rf:
            equal += 1
        else:
            worse += 1
    return ComparisonSummary(algorithm_id, float(threshold), portfolio, better, equal, worse)


@dataclass(frozen=True)
class DiagnosticPair:
    focus_instance: int
    other_class: int
    other_instance: int
    similarity: float
    performance_gap: float


def similarity_diagnostics(dataset: Dataset, focus_class: int, portfolio: Sequence[str] | None = None,
                           sim_config: SimilarityConfig = SimilarityConfig()) -> list[DiagnosticPair]:
    """Similarity and |target difference| between each focus instance and every other-class instance.

    Scaling is fitted on the other classes, the same rows a fold holding out
    ``focus_class`` would search.
    """
    ds = dataset if portfolio is None else dataset.with_portfolio(portfolio)
    focus = np.nonzero(ds.class_ids == focus_class)[0]
    if len(focus) == 0:
        raise ValueError(f"class {focus_class} is not in the dataset")
    others = np.nonzero(ds.class_ids != focus_class)[0]
    if len(others) == 0:
        return []
    train_n, focus_n = normalize_features(ds.X[others], ds.X[focus], sim_config.normalize)
    pairs = []
    for q, fi in enumerate(focus):
        sims = similarity_row(focus_n[q], train_n)
        for j, oi in enumerate(others):
            pairs.append(DiagnosticPair(int(ds.instance_ids[fi]), int(ds.class_ids[oi]),
                                        int(ds.instance_ids[oi]), float(sims[j]),
                                        float(abs(ds.y[fi] - ds.y[oi]))))
    pairs.sort(key=lambda p: (-p.similarity, p.focus_instance, p.other_class, p.other_instance))
    return pairs
