import pytest

from conftest import synthetic_dataset, synthetic_sources
from rfclust.forest import HyperParams
from rfclust.lopo import (
    Dataset,
    FoldReport,
    Row,
    compare,
    fold_importances,
    join_dataset,
    make_lopo_folds,
    mae,
    run_fold,
    run_lopo,
    similarity_diagnostics,
)
from rfclust.pipeline import targets_for
from rfclust.similarity_calibration import SimilarityConfig

GRID = [HyperParams(10, "all", 3, 2), HyperParams(10, "sqrt", 5, 5)]
SIMS = [SimilarityConfig(t) for t in (0.5, 0.7, 0.9)]


def test_fold_shapes():
    folds = make_lopo_folds(synthetic_dataset())
    assert len(folds) == 12
    assert all(len(f.train) == 55 and len(f.test) == 5 for f in folds)
    assert [f.held_out_class for f in folds] == list(range(1, 13))
    folds = make_lopo_folds(synthetic_dataset(n_classes=30, per_class=1))
    assert all(len(f.train) == 29 and len(f.test) == 1 for f in folds)
    with pytest.raises(ValueError):
        make_lopo_folds(synthetic_dataset(n_classes=1))


def test_mae():
    assert mae([0.5, -1.5, 1.0]) == 1.0
    assert mae([0.0, 0.0]) == 0.0
    with pytest.raises(ValueError):
        mae([])


def test_dataset_validation():
    row = Row("s", 1, 1, {"a": 1.0}, 0.0)
    with pytest.raises(ValueError, match="duplicate"):
        Dataset([row, row], ["a"])
    with pytest.raises(ValueError, match="'b'"):
        Dataset([row], ["a", "b"])


def test_join_mismatch_lists_both_sides():
    vectors, records = synthetic_sources(n_classes=3, per_class=2)
    targets = targets_for(records, "de1")
    targets.pop((2, 1))
    targets[(9, 9)] = 0.0
    with pytest.raises(ValueError) as err:
        join_dataset(vectors, targets, sorted(vectors[0].values))
    assert "(2, 1)" in str(err.value) and "(9, 9)" in str(err.value)


def _manual_report(rf, rc):
    n = len(rf)
    return FoldReport(1, list(range(n)), [0.0] * n, rf, rf, {0.9: rc}, {0.9: rc}, {0.9: [1] * n},
                      HyperParams(), 0.0)


def test_compare_counts():
    reps = [_manual_report([1.0, 1.0], [0.5, 0.5]),
            _manual_report([1.0, 1.0], [1.0, 1.0]),
            _manual_report([1.0, 1.0], [2.0, 0.5])]
    s = compare(reps, 0.9, "de1", "top10")
    assert (s.n_better, s.n_equal, s.n_worse) == (1, 1, 1)


def test_fold_report_invariants(dataset):
    reports = run_lopo(dataset, GRID, SIMS, seed=3)
    for rep in reports:
        assert rep.held_out_class not in rep.train_classes
        for cfg in SIMS:
            t = cfg.threshold
            assert rep.held_out_class not in rep.neighbor_classes[t]
            queries = [q for q in rep.queries if q["threshold"] == t]
            for k, rf_e, rc_e, raw, q in zip(rep.neighbor_counts[t], rep.rf_abs_errors,
                                             rep.rfclust_abs_errors[t], rep.rf_predictions, queries):
                assert q["k"] == k and q["raw"] == raw
                if k == 0:
                    assert rc_e == rf_e and q["final"] == raw
                else:
                    assert q["final"] == (raw + q["aggregated"]) / 2
        assert all(a <= b <= c for a, b, c in zip(rep.neighbor_counts[0.9], rep.neighbor_counts[0.7],
                                                  rep.neighbor_counts[0.5]))
    for t in (0.5, 0.7, 0.9):
        s = compare(reports, t)
        assert s.n_better + s.n_equal + s.n_worse == 12


def test_report_roundtrip(dataset):
    rep = run_lopo(dataset, GRID[:1], SIMS, seed=0)[0]
    back = FoldReport.from_dict(rep.to_dict())
    assert back == rep


def test_duplicate_row_halves_error():
    # class 2 duplicates class 1; the held-out class-2 row has exactly one neighbour at similarity 1
    rows = [Row("s", 1, 1, {"a": 0.0, "b": 1.0}, 4.0), Row("s", 2, 1, {"a": 0.0, "b": 1.0}, 4.0),
            Row("s", 3, 1, {"a": 1.0, "b": 0.0}, -2.0), Row("s", 4, 1, {"a": 1.0, "b": 0.2}, -1.0)]
    ds = Dataset(rows, ["a", "b"])
    fold = make_lopo_folds(ds)[1]
    rep = run_fold(ds, fold, [HyperParams(1, "all", 1, 2)], [SimilarityConfig(0.999)], seed=0)
    e = rep.rf_abs_errors[0]
    assert rep.neighbor_counts[0.999] == [1]
    assert rep.rfclust_abs_errors[0.999][0] == pytest.approx(e / 2, abs=1e-12)


def test_lopo_is_deterministic(dataset):
    a = run_lopo(dataset, GRID, SIMS, seed=5)
    b = run_lopo(dataset, GRID, SIMS, seed=5)
    assert [r.to_dict() for r in a] == [r.to_dict() for r in b]


def test_fold_importances_cover_portfolio(dataset):
    imps = fold_importances(dataset, GRID[:1], seed=1, repeats=2)
    assert len(imps) == 12 and all(set(m) == set(dataset.portfolio) for m in imps)


def test_similarity_diagnostics():
    rows = [Row("s", 1, 1, {"a": 1.0, "b": 2.0}, 1.0), Row("s", 1, 2, {"a": 2.0, "b": 1.0}, 0.0),
            Row("s", 2, 1, {"a": 1.0, "b": 2.0}, 1.0), Row("s", 3, 1, {"a": 3.0, "b": 3.0}, 2.5)]
    ds = Dataset(rows, ["a", "b"])
    pairs = similarity_diagnostics(ds, 1, None, SimilarityConfig(-1.0, normalize="none"))
    assert len(pairs) == 4 and all(p.other_class != 1 for p in pairs)
    sims = [p.similarity for p in pairs]
    assert sims == sorted(sims, reverse=True)
    top = pairs[0]
    assert (top.focus_instance, top.other_class, top.similarity, top.performance_gap) == (1, 2, 1.0, 0.0)
    with pytest.raises(ValueError):
        similarity_diagnostics(ds, 7)
