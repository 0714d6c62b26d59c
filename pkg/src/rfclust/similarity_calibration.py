"""Similarity-thresholded neighbour retrieval and calibration of model predictions.

A query's prediction is averaged with an aggregate of the ground-truth
performances of every training instance whose cosine similarity to the
query reaches the threshold. With no such instance the model prediction is
used unchanged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

AGGREGATIONS = ("weighted_mean", "mean", "median")
NORMALIZATIONS = ("min_max_on_train", "none")


@dataclass(frozen=True)
class SimilarityConfig:
    """Threshold, aggregator and pre-similarity scaling.

    The threshold is only required to be finite: values above 1 are a
    legitimate way to force the model-only path.
    """

    threshold: float = 0.9
    aggregation: str = "weighted_mean"
    normalize: str = "min_max_on_train"

    def __post_init__(self):
        if not math.isfinite(self.threshold):
            raise ValueError("threshold must be finite")
        if self.aggregation not in AGGREGATIONS:
            raise ValueError(f"aggregation must be one of {AGGREGATIONS}")
        if self.normalize not in NORMALIZATIONS:
            raise ValueError(f"normalize must be one of {NORMALIZATIONS}")


@dataclass(frozen=True)
class Neighbor:
    train_index: int
    similarity: float
    performance: float


@dataclass(frozen=True)
class NeighborSet:
    entries: tuple[Neighbor, ...] = ()

    @property
    def k(self) -> int:
        return len(self.entries)

    def indices(self) -> set[int]:
        return {e.train_index for e in self.entries}

    @property
    def similarities(self) -> np.ndarray:
        return np.array([e.similarity for e in self.entries], dtype=float)

    @property
    def performances(self) -> np.ndarray:
        return np.array([e.performance for e in self.entries], dtype=float)


@dataclass(frozen=True)
class CalibratedPrediction:
    raw_prediction: float
    aggregated_neighbor_value: float | None
    final: float
    neighbor_count: int


def _cosine_rows(q: np.ndarray, T: np.ndarray) -> np.ndarray:
    """Cosine of ``q`` against each row of ``T``; no row may be zero.

    Dot products are elementwise products summed along the row, the same
    reduction for ``q . T[i]`` as for ``q . q``, and the denominator is
    ``sqrt(|q|^2 |T[i]|^2)``. For a row equal to ``q`` this gives exactly 1.
    """
    dots = (T * q).sum(axis=1)
    qq = (q * q).sum()
    tt = (T * T).sum(axis=1)
    with np.errstate(over="ignore", under="ignore"):
        denom = np.sqrt(qq * tt)
    bad = ~(np.isfinite(denom) & (denom > 0))
    if np.any(bad):
        # the product of squared norms over- or underflowed
        denom[bad] = np.linalg.norm(q) * np.linalg.norm(T[bad], axis=1)
    return np.clip(dots / denom, -1.0, 1.0)


def cosine_similarity(a, b) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    if not np.any(a) or not np.any(b):
        raise ValueError("cosine similarity is undefined for a zero vector")
    return float(_cosine_rows(a, b[None, :])[0])


def normalize_features(train, query=None, method: str = "min_max_on_train"):
    """Scale columns with statistics of ``train`` only.

    Returns ``(train_scaled, query_scaled)``; ``query`` may be one vector or
    a matrix and is clipped to [0, 1]. Columns constant on ``train`` map to
    0.5 for every row, query rows included.
    """
    train = np.atleast_2d(np.asarray(train, dtype=float))
    if train.shape[0] == 0:
        raise ValueError("training set is empty")
    q = None if query is None else np.asarray(query, dtype=float)
    if method == "none":
        return train.copy(), None if q is None else q.copy()
    if method != "min_max_on_train":
        raise ValueError(f"unknown normalisation {method!r}")
    lo = train.min(axis=0)
    span = train.max(axis=0) - lo
    const = span == 0
    safe = np.where(const, 1.0, span)

    def scale(M):
        out = (M - lo) / safe
        return np.where(const, 0.5, out)

    train_n = scale(train)
    query_n = None if q is None else np.clip(scale(q), 0.0, 1.0)
    return train_n, query_n


def similarity_row(query, train) -> np.ndarray:
    """Cosine similarity of one (already scaled) query to every training row.

    A zero vector has no direction. It is given similarity 1 to another zero
    vector and 0 to anything else, so that it is never silently dropped or
    matched by rounding noise.
    """
    q = np.asarray(query, dtype=float)
    T = np.atleast_2d(np.asarray(train, dtype=float))
    if T.shape[1:] != q.shape:
        raise ValueError(f"dimension mismatch: {q.shape} vs rows of {T.shape}")
    zero_rows = ~np.any(T, axis=1)
    if not np.any(q):
        return zero_rows.astype(float)
    out = np.zeros(len(T))
    out[~zero_rows] = _cosine_rows(q, T[~zero_rows])
    return out


def neighbors_at(similarities, performances, threshold: float) -> NeighborSet:
    """Training rows with similarity >= threshold, most similar first."""
    s = np.asarray(similarities, dtype=float)
    p = np.asarray(performances, dtype=float)
    hits = np.nonzero(s >= threshold)[0]
    hits = sorted(hits, key=lambda i: (-s[i], i))
    return NeighborSet(tuple(Neighbor(int(i), float(s[i]), float(p[i])) for i in hits))


def find_neighbors(query, train_features, train_performances,
                   config: SimilarityConfig) -> NeighborSet:
    train_features = np.atleast_2d(np.asarray(train_features, dtype=float))
    if len(train_features) != len(train_performances):
        raise ValueError("one performance value per training row is required")
    train_n, query_n = normalize_features(train_features, query, config.normalize)
    return neighbors_at(similarity_row(query_n, train_n), train_performances, config.threshold)


def aggregate(neighbors: NeighborSet, method: str = "weighted_mean") -> float:
    """F(p_1..p_k).

    ``weighted_mean`` weights by similarity. If the similarities sum to zero
    or less (only possible with a non-positive threshold) it uses the plain
    mean instead.
    """
    if neighbors.k == 0:
        raise ValueError("cannot aggregate an empty neighbour set")
    p = neighbors.performances
    if method == "mean":
        return float(np.mean(p))
    if method == "median":
        return float(np.median(p))
    if method == "weighted_mean":
        s = neighbors.similarities
        total = s.sum()
        if total <= 0:
            return float(np.mean(p))
        return float(np.dot(s, p) / total)
    raise ValueError(f"unknown aggregation {method!r}")


def calibrate(raw: float, neighbors: NeighborSet, method: str = "weighted_mean") -> CalibratedPrediction:
    raw = float(raw)
    if neighbors.k == 0:
        return CalibratedPrediction(raw, None, raw, 0)
    agg = aggregate(neighbors, method)
    return CalibratedPrediction(raw, agg, (raw + agg) / 2, neighbors.k)


def query_record(suite: str, class_id: int, instance_id: int, threshold: float,
                 neighbors: NeighborSet, train_keys: Sequence[tuple[int, int]],
                 prediction: CalibratedPrediction) -> dict:
    """The per-query JSON-lines record; ``train_keys`` maps train index to (class, instance)."""
    return {
        "suite": suite,
        "class_id": int(class_id),
        "instance_id": int(instance_id),
        "threshold": float(threshold),
        "k": neighbors.k,
        "neighbors": [
            {"class_id": int(train_keys[e.train_index][0]),
             "instance_id": int(train_keys[e.train_index][1]),
             "similarity": e.similarity,
             "performance": e.performance}
            for e in neighbors.entries
        ],
        "raw": prediction.raw_prediction,
        "aggregated": prediction.aggregated_neighbor_value,
        "final": prediction.final,
    }
