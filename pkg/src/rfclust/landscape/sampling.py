"""Latin hypercube designs, plain and maximin-improved."""

from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree

SAMPLERS = ("LHS", "ImprovedLHS")
N_CANDIDATES = 20


def _unit_lhs(n: int, D: int, rng: np.random.Generator) -> np.ndarray:
    perms = np.argsort(rng.random((D, n)), axis=1).T
    return (perms + rng.random((n, D))) / n


def min_pairwise_distance(X: np.ndarray) -> float:
    if len(X) < 2:
        return np.inf
    d, _ = cKDTree(X).query(X, k=2)
    return float(d[:, 1].min())


def lhs_candidates(n: int, D: int, count: int, rng: np.random.Generator) -> list[np.ndarray]:
    """``count`` independent unit-cube Latin hypercubes drawn in order from ``rng``."""
    return [_unit_lhs(n, D, rng) for _ in range(count)]


def lhs_sample(n: int, D: int, bounds, sampler: str = "ImprovedLHS",
               rng: np.random.Generator | None = None,
               n_candidates: int = N_CANDIDATES) -> np.ndarray:
    """Latin hypercube sample of ``n`` points in the box ``bounds = (lower, upper)``.

    ``ImprovedLHS`` draws ``n_candidates`` designs and keeps the one with the
    largest minimum pairwise distance. ``LHS`` returns the first candidate the
    same generator would have produced.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    if sampler not in SAMPLERS:
        raise ValueError(f"unknown sampler {sampler!r}")
    rng = np.random.default_rng() if rng is None else rng
    lower, upper = (np.broadcast_to(np.asarray(b, dtype=float), (D,)) for b in bounds)
    if sampler == "LHS":
        unit = _unit_lhs(n, D, rng)
    else:
        cands = lhs_candidates(n, D, n_candidates, rng)
        scores = [min_pairwise_distance(c * (upper - lower)) for c in cands]
        unit = cands[int(np.argmax(scores))]
    return lower + unit * (upper - lower)
