"""Hyperparameter search, permutation importance and feature portfolios."""

from __future__ import annotations

import logging
import warnings
from collections import defaultdict
from typing import Mapping, Sequence

import numpy as np

from ._seeding import derive_seed, rng_for
from .forest import Forest, HyperParams, Tree, fit_forest

log = logging.getLogger(__name__)

INNER_FOLDS = 3


def group_folds(groups, n_folds: int = INNER_FOLDS, seed: int = 0):
    """Split row indices so no group straddles train and validation.

    Groups are shuffled with ``seed`` and dealt into ``n_folds`` near-equal
    chunks. With fewer groups than folds every group is its own fold.
    """
    groups = np.asarray(groups)
    uniq = np.unique(groups)
    if len(uniq) < 2:
        return []
    if len(uniq) < n_folds:
        chunks = [[g] for g in uniq]
    else:
        perm = rng_for(seed, len(uniq)).permutation(uniq)
        chunks = [list(c) for c in np.array_split(perm, n_folds)]
    folds = []
    for chunk in chunks:
        val = np.isin(groups, chunk)
        folds.append((np.nonzero(~val)[0], np.nonzero(val)[0]))
    return folds


def _truncated_predictions(tree: Tree, X: np.ndarray, depths, splits) -> np.ndarray:
    """Predictions of ``tree.truncated(d, s)`` for all (d, s): shape (len(depths), len(splits), n)."""
    path = tree.paths(X)
    valid = path >= 0
    safe = np.where(valid, path, 0)
    nsamp = np.where(valid, tree.n_samples[safe], 0)
    leaf = ~valid | (tree.feature[safe] < 0)
    vals = tree.value[safe]
    rows = np.arange(len(X))
    out = np.empty((len(depths), len(splits), len(X)))
    for si, s in enumerate(splits):
        # first depth whose node stops growth under min_samples_split = s
        stop = np.argmax(leaf | (nsamp < s), axis=1)
        for di, d in enumerate(depths):
            out[di, si] = vals[rows, np.minimum(stop, d)]
    return out


def grid_search(X, y, groups, grid: Sequence[HyperParams], seed: int = 0,
                return_scores: bool = False):
    """Pick the grid entry with the lowest mean inner-fold MAE.

    Inner folds are group-aware (see :func:`group_folds`). Candidates sharing
    ``max_features`` are scored from one forest of the largest size, depth
    and smallest split limit; each candidate's forest is a prefix of its
    trees truncated to the candidate's limits, which is exactly what fitting
    it directly with the same seed gives. Ties go to the earlier entry.
    A single-entry grid is returned without scoring unless scores are asked for.
    """
    grid = list(grid)
    if not grid:
        raise ValueError("empty hyperparameter grid")
    if len(grid) == 1 and not return_scores:
        return grid[0]
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    folds = group_folds(groups, INNER_FOLDS, seed)
    if not folds:
        warnings.warn("fewer than two groups; returning the first grid entry")
        return (grid[0], np.zeros(len(grid))) if return_scores else grid[0]

    scores = np.zeros(len(grid))
    by_mf = defaultdict(list)
    for i, hp in enumerate(grid):
        by_mf[hp.max_features].append(i)

    for k, (tr, va) in enumerate(folds):
        fold_seed = derive_seed(seed, k)
        for mf, members in by_mf.items():
            depths = sorted({grid[i].max_depth for i in members})
            splits = sorted({grid[i].min_samples_split for i in members})
            big = HyperParams(max(grid[i].n_estimators for i in members), mf,
                              max(depths), min(splits))
            forest = fit_forest(X[tr], y[tr], big, fold_seed)
            per_tree = np.stack([_truncated_predictions(t, X[va], depths, splits)
                                 for t in forest.trees])
            running = np.cumsum(per_tree, axis=0)
            for i in members:
                hp = grid[i]
                pred = running[hp.n_estimators - 1, depths.index(hp.max_depth),
                               splits.index(hp.min_samples_split)] / hp.n_estimators
                scores[i] += np.mean(np.abs(pred - y[va]))
    scores /= len(folds)
    best = grid[int(np.argmin(scores))]
    return (best, scores) if return_scores else best


def permutation_importance(forest: Forest, X_val, y_val, repeats: int = 5,
                           rng: np.random.Generator | None = None) -> dict[str, float]:
    """Mean MAE increase when one feature column is shuffled."""
    if repeats < 1:
        raise ValueError("repeats must be at least 1")
    X_val = np.asarray(X_val, dtype=float)
    y_val = np.asarray(y_val, dtype=float)
    if len(X_val) == 0:
        raise ValueError("empty validation set")
    rng = np.random.default_rng() if rng is None else rng
    base = np.mean(np.abs(forest.predict(X_val) - y_val))
    out = {}
    for j, name in enumerate(forest.feature_names):
        total = 0.0
        for _ in range(repeats):
            Xp = X_val.copy()
            Xp[:, j] = rng.permutation(Xp[:, j])
            total += np.mean(np.abs(forest.predict(Xp) - y_val)) - base
        out[name] = float(total / repeats)
    return out


def summed_importance(per_fold: Sequence[Mapping[str, float]]) -> dict[str, float]:
    if not per_fold:
        raise ValueError("no importance maps given")
    keys = set(per_fold[0])
    if any(set(m) != keys for m in per_fold):
        raise ValueError("importance maps do not share one feature set")
    return {k: float(sum(m[k] for m in per_fold)) for k in keys}


def rank_features(per_fold: Sequence[Mapping[str, float]]) -> list[tuple[str, float]]:
    """(feature, summed importance), best first, ties alphabetical."""
    total = summed_importance(per_fold)
    return sorted(total.items(), key=lambda kv: (-kv[1], kv[0]))


def select_top_features(per_fold: Sequence[Mapping[str, float]], k: int) -> list[str]:
    ranked = rank_features(per_fold)
    if k > len(ranked):
        warnings.warn(f"requested {k} features but only {len(ranked)} exist; using all")
    return [name for name, _ in ranked[:k]]
