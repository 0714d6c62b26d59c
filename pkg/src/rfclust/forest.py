"""CART regression trees and bootstrap random forests.

Randomness inside a tree is keyed by node position (root 1, children 2i and
2i+1) through a SplitMix64 hash rather than drawn from one sequential
stream. A tree grown with a
smaller ``max_depth`` or larger ``min_samples_split`` is therefore exactly
the truncation of a tree grown with looser limits from the same seed, which
the grid search relies on.
"""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import asdict, dataclass, field
from itertools import product
from typing import Mapping, Sequence

import numpy as np

from ._seeding import derive_seed, rng_for

MAX_FEATURES = ("all", "sqrt", "log2")

PARAM_GRID = {
    "n_estimators": (10, 20, 50, 70),
    "max_features": MAX_FEATURES,
    "max_depth": (3, 5, 7, 10),
    "min_samples_split": (2, 5, 7, 10),
}


@dataclass(frozen=True)
class HyperParams:
    n_estimators: int = 10
    max_features: str = "all"
    max_depth: int = 3
    min_samples_split: int = 2

    def __post_init__(self):
        if self.n_estimators < 1:
            raise ValueError("n_estimators must be positive")
        if self.max_features not in MAX_FEATURES:
            raise ValueError(f"max_features must be one of {MAX_FEATURES}")
        if not 0 <= self.max_depth <= 60:
            raise ValueError("max_depth must lie in [0, 60]")
        if self.min_samples_split < 2:
            raise ValueError("min_samples_split must be at least 2")


def param_grid(grid: Mapping[str, Sequence] = PARAM_GRID) -> list[HyperParams]:
    """Cartesian product in declaration order: smaller forests come first."""
    keys = ("n_estimators", "max_features", "max_depth", "min_samples_split")
    return [HyperParams(**dict(zip(keys, combo))) for combo in product(*(grid[k] for k in keys))]


def n_split_features(max_features: str, n_features: int) -> int:
    if max_features == "all":
        return n_features
    if max_features == "sqrt":
        return max(1, math.ceil(math.sqrt(n_features)))
    return max(1, math.ceil(math.log2(n_features))) if n_features > 1 else 1


@dataclass
class Tree:
    """Flat node arrays in breadth-first order; ``feature == -1`` marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    n_samples: np.ndarray
    depth: np.ndarray

    @property
    def node_count(self) -> int:
        return len(self.feature)

    @property
    def max_depth(self) -> int:
        return int(self.depth.max())

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf index reached by every row of ``X``."""
        node = np.zeros(len(X), dtype=np.int64)
        while True:
            f = self.feature[node]
            inner = f >= 0
            if not inner.any():
                return node
            rows = np.nonzero(inner)[0]
            go_left = X[rows, f[rows]] <= self.threshold[node[rows]]
            node[rows] = np.where(go_left, self.left[node[rows]], self.right[node[rows]])

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(np.asarray(X, dtype=float))]

    def paths(self, X: np.ndarray) -> np.ndarray:
        """Node visited at each depth by every row; -1 past the leaf."""
        X = np.asarray(X, dtype=float)
        out = np.full((len(X), self.max_depth + 1), -1, dtype=np.int64)
        node = np.zeros(len(X), dtype=np.int64)
        alive = np.ones(len(X), dtype=bool)
        for d in range(self.max_depth + 1):
            out[alive, d] = node[alive]
            f = np.where(alive, self.feature[node], -1)
            inner = f >= 0
            rows = np.nonzero(inner)[0]
            go_left = X[rows, f[rows]] <= self.threshold[node[rows]]
            node[rows] = np.where(go_left, self.left[node[rows]], self.right[node[rows]])
            alive = inner
        return out

    def truncated(self, max_depth: int, min_samples_split: int) -> "Tree":
        """The tree that fitting with tighter stopping limits would have produced."""
        keep_inner = ((self.feature >= 0) & (self.depth < max_depth)
                      & (self.n_samples >= min_samples_split))
        mapping: dict[int, int] = {}
        order: list[int] = []
        queue = deque([0])
        while queue:  # breadth-first, matching the numbering of grow_trees
            i = queue.popleft()
            mapping[i] = len(order)
            order.append(i)
            if keep_inner[i]:
                queue.append(int(self.left[i]))
                queue.append(int(self.right[i]))
        idx = np.array(order)
        inner = keep_inner[idx]
        remap = np.vectorize(lambda j: mapping.get(int(j), -1), otypes=[np.int64])
        return Tree(
            feature=np.where(inner, self.feature[idx], -1),
            threshold=np.where(inner, self.threshold[idx], np.nan),
            left=np.where(inner, remap(self.left[idx]), -1),
            right=np.where(inner, remap(self.right[idx]), -1),
            value=self.value[idx].copy(),
            n_samples=self.n_samples[idx].copy(),
            depth=self.depth[idx].copy(),
        )

    def to_dict(self, feature_names: Sequence[str] | None = None, node: int = 0) -> dict:
        if self.feature[node] < 0:
            return {"leaf_value": float(self.value[node])}
        f = int(self.feature[node])
        return {
            "feature": feature_names[f] if feature_names else f,
            "threshold": float(self.threshold[node]),
            "left": self.to_dict(feature_names, int(self.left[node])),
            "right": self.to_dict(feature_names, int(self.right[node])),
        }


_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)


def splitmix64(x: np.ndarray) -> np.ndarray:
    """SplitMix64 finaliser applied elementwise (wrapping uint64 arithmetic)."""
    z = np.asarray(x, dtype=np.uint64) + _GOLDEN
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


def candidate_features(seeds, node_keys: np.ndarray, n_features: int, m: int) -> np.ndarray:
    """Ascending feature indices, ``m`` per node, as an (nodes x m) array.

    Each (tree seed, node key, feature) triple hashes to an independent
    uniform key and a node keeps the ``m`` features with the smallest keys.
    ``seeds`` is a scalar or one seed per node.
    """
    node_keys = np.asarray(node_keys, dtype=np.uint64)
    if m >= n_features:
        return np.broadcast_to(np.arange(n_features), (len(node_keys), n_features))
    seeds = np.asarray(seeds, dtype=np.int64).astype(np.uint64)
    base = splitmix64(seeds ^ splitmix64(node_keys))
    keys = splitmix64(base[:, None] ^ splitmix64(np.arange(n_features, dtype=np.uint64) + _MIX1))
    return np.sort(np.argsort(keys, axis=1, kind="stable")[:, :m], axis=1)


def _level_splits(X, y, ranks, groups, samples, counts, means, cand):
    """Best split of every node in a batch of same-level nodes.

    ``samples`` lists the rows of all nodes back to back (``groups`` gives
    the node of each) and ``cand`` holds each node's candidate features.
    Every node is scattered into its own zero-padded block, so its sums
    never mix with another node's and the result for a node does not depend
    on which other nodes share the batch. Returns per-node (feature,
    threshold) with feature -1 where no split exists.
    """
    n = len(X)
    L, m = cand.shape
    starts = np.concatenate(([0], np.cumsum(counts)[:-1]))
    width = int(counts.max())
    cols = cand[groups]
    order = (groups[:, None] * n + ranks[samples[:, None], cols]).argsort(axis=0, kind="stable")
    rows = samples[order]
    g = groups[order[:, 0]]
    pos = np.arange(len(samples)) - starts[g]
    cols = cand[g]
    X3 = np.full((L, width, m), np.nan)
    Y3 = np.zeros((L, width, m))
    X3[g, pos] = X[rows, cols]
    Y3[g, pos] = y[rows] - means[g][:, None]
    cs = Y3.cumsum(axis=1)
    cs2 = (Y3 * Y3).cumsum(axis=1)
    nl = np.arange(1, width, dtype=float)[None, :, None]
    nr = counts[:, None, None] - nl
    head, head2 = cs[:, :-1], cs2[:, :-1]
    rsum = cs[:, -1:] - head
    with np.errstate(divide="ignore", invalid="ignore"):
        loss = (head2 - head * head / nl) + ((cs2[:, -1:] - head2) - rsum * rsum / nr)
    flat = np.where(X3[:, 1:] > X3[:, :-1], loss, np.inf).transpose(0, 2, 1).reshape(L, -1)
    best = flat.argmin(axis=1)
    nodes = np.arange(L)
    found = np.isfinite(flat[nodes, best])
    j, at = np.divmod(best, max(width - 1, 1))
    lo = X3[nodes, at, j]
    hi = X3[nodes, np.minimum(at + 1, width - 1), j]
    thr = 0.5 * (lo + hi)
    thr = np.where((lo <= thr) & (thr < hi), thr, lo)
    return np.where(found, cand[nodes, j], -1), thr


def _bucketed_splits(X, y, ranks, groups, samples, counts, means, cand):
    """:func:`_level_splits` on nodes grouped by size, to keep padding small."""
    feat = np.full(len(counts), -1)
    thr = np.full(len(counts), np.nan)
    bucket = np.ceil(np.log2(counts)).astype(int)
    for b in np.unique(bucket):
        members = bucket == b
        sel = members[groups]
        local = (np.cumsum(members) - 1)[groups[sel]]
        f, t = _level_splits(X, y, ranks, local, samples[sel], counts[members],
                             means[members], cand[members])
        feat[members], thr[members] = f, t
    return feat, thr


def _group_mean(groups, weights, n_groups):
    counts = np.bincount(groups, minlength=n_groups)
    return counts, np.bincount(groups, weights=weights, minlength=n_groups) / counts


def grow_trees(X, y, roots: Sequence[np.ndarray], seeds: Sequence[int],
               params: HyperParams) -> list[Tree]:
    """Grow one tree per entry of ``roots`` (row indices into ``X``), level by level.

    All trees advance together so each numpy call covers a whole depth
    level of the forest. Node values are sequential per-node sums and every
    split search is confined to its node, so a tree comes out the same
    whether it is grown alone or alongside others.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.isnan(X).any() or np.isnan(y).any():
        raise ValueError("inputs contain NaN")
    K = X.shape[1]
    m = n_split_features(params.max_features, K)
    ranks = X.argsort(axis=0, kind="stable").argsort(axis=0, kind="stable")
    seeds = np.asarray(seeds, dtype=np.int64)

    samples = np.concatenate([np.asarray(r, dtype=np.int64) for r in roots])
    groups = np.repeat(np.arange(len(roots)), [len(r) for r in roots])
    counts, values = _group_mean(groups, y[samples], len(roots))
    tree_of = np.arange(len(roots))
    keys = np.ones(len(roots), dtype=np.uint64)
    levels = []
    offset = 0
    depth = 0
    while True:
        L = len(counts)
        lvl = {"tree": tree_of, "value": values, "n_samples": counts,
               "depth": np.full(L, depth), "feature": np.full(L, -1),
               "threshold": np.full(L, np.nan), "left": np.full(L, -1),
               "right": np.full(L, -1)}
        levels.append(lvl)
        offset += L
        if depth >= params.max_depth:
            break
        ys = y[samples]
        starts = np.concatenate(([0], np.cumsum(counts)[:-1]))
        can = ((counts >= params.min_samples_split)
               & (np.minimum.reduceat(ys, starts) < np.maximum.reduceat(ys, starts)))
        if not can.any():
            break
        act = np.nonzero(can)[0]
        keep = can[groups]
        s_act = samples[keep]
        g_act = (np.cumsum(can) - 1)[groups[keep]]
        cand = candidate_features(seeds[tree_of[act]], keys[act], K, m)
        feat, thr = _bucketed_splits(X, y, ranks, g_act, s_act, counts[act], values[act], cand)
        split = feat >= 0
        if not split.any():
            break
        sp = act[split]
        J = len(sp)
        lvl["feature"][sp] = feat[split]
        lvl["threshold"][sp] = thr[split]
        lvl["left"][sp] = offset + 2 * np.arange(J)
        lvl["right"][sp] = offset + 2 * np.arange(J) + 1

        jmap = np.full(len(act), -1)
        jmap[split] = np.arange(J)
        jj = jmap[g_act]
        sel = jj >= 0
        s2, jj = s_act[sel], jj[sel]
        go_right = X[s2, feat[split][jj]] > thr[split][jj]
        child = 2 * jj + go_right
        order = np.argsort(child, kind="stable")
        samples, groups = s2[order], child[order]
        counts, values = _group_mean(groups, y[samples], 2 * J)
        tree_of = np.repeat(tree_of[sp], 2)
        keys = np.stack([2 * keys[sp], 2 * keys[sp] + np.uint64(1)], axis=1).ravel()
        depth += 1

    cat = {k: np.concatenate([lv[k] for lv in levels]) for k in levels[0]}
    order = np.argsort(cat["tree"], kind="stable")
    bounds = np.searchsorted(cat["tree"][order], np.arange(len(roots) + 1))
    local = np.empty(len(order), dtype=np.int64)
    local[order] = np.arange(len(order)) - bounds[cat["tree"][order]]
    trees = []
    for t in range(len(roots)):
        idx = order[bounds[t]:bounds[t + 1]]
        inner = cat["feature"][idx] >= 0
        trees.append(Tree(
            feature=cat["feature"][idx].astype(np.int64),
            threshold=cat["threshold"][idx],
            left=np.where(inner, local[np.maximum(cat["left"][idx], 0)], -1),
            right=np.where(inner, local[np.maximum(cat["right"][idx], 0)], -1),
            value=cat["value"][idx],
            n_samples=cat["n_samples"][idx].astype(np.int64),
            depth=cat["depth"][idx].astype(np.int64),
        ))
    return trees


def fit_tree(X, y, params: HyperParams, seed: int = 0) -> Tree:
    """Grow one regression tree on all rows of ``X``.

    A node becomes a leaf at ``max_depth``, below ``min_samples_split``
    samples, when its targets are constant, or when no candidate feature
    separates its samples. Split thresholds sit midway between consecutive
    distinct values; ties keep the lowest feature index, then the smallest
    threshold.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or len(X) == 0 or len(X) != len(y):
        raise ValueError("fit_tree needs a non-empty 2-D X with one target per row")
    return grow_trees(X, y, [np.arange(len(y))], [seed], params)[0]


@dataclass
class Forest:
    trees: list[Tree]
    params: HyperParams
    feature_names: list[str]
    bootstrap_seeds: list[int] = field(default_factory=list)

    def predict(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != len(self.feature_names):
            raise ValueError(f"expected {len(self.feature_names)} features, got {X.shape[1]}")
        return np.mean([t.predict(X) for t in self.trees], axis=0)

    def to_json(self) -> str:
        return json.dumps({
            "params": asdict(self.params),
            "feature_names": self.feature_names,
            "bootstrap_seeds": self.bootstrap_seeds,
            "trees": [t.to_dict(self.feature_names) for t in self.trees],
        }, indent=1)


def fit_forest(X, y, params: HyperParams, seed: int = 0, bootstrap: bool = True,
               feature_names: Sequence[str] | None = None) -> Forest:
    """``n_estimators`` trees, tree i seeded from ``(seed, i)`` only."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or len(X) == 0:
        raise ValueError("fit_forest needs a non-empty 2-D X")
    names = list(feature_names) if feature_names is not None else [f"x{j}" for j in range(X.shape[1])]
    if len(names) != X.shape[1]:
        raise ValueError("feature_names length does not match X")
    if len(y) != len(X):
        raise ValueError("X and y have different lengths")
    n = len(y)
    seeds = [derive_seed(seed, i) for i in range(params.n_estimators)]
    if bootstrap:
        rows = np.concatenate([rng_for(s, 0).integers(0, n, size=n) for s in seeds])
    else:
        rows = np.tile(np.arange(n), len(seeds))
    # stack the bootstrap samples so tree i sees rows i*n .. (i+1)*n - 1 in draw order
    roots = [np.arange(i * n, (i + 1) * n) for i in range(len(seeds))]
    trees = grow_trees(X[rows], y[rows], roots, seeds, params)
    return Forest(trees, params, names, seeds)


def predict(forest: Forest, x: Mapping[str, float]) -> float:
    """Forest prediction for one named feature vector."""
    missing = [n for n in forest.feature_names if n not in x]
    if missing:
        raise KeyError(f"missing feature {missing[0]!r}")
    row = np.array([[x[n] for n in forest.feature_names]], dtype=float)
    return float(forest.predict(row)[0])
