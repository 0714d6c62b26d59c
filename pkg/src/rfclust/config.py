"""Experiment configuration and its JSON form."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Mapping

from ._seeding import derive_seed
from .benchmark import SUITES
from .de import NAMED_CONFIGS, STRATEGIES, DEConfig
from .forest import PARAM_GRID, HyperParams, param_grid
from .landscape.sampling import SAMPLERS
from .similarity_calibration import AGGREGATIONS, NORMALIZATIONS, SimilarityConfig

TARGET_STATISTICS = ("median", "mean")
# the widest strategy draws seven donors besides the target
MIN_POPULATION = 8


@dataclass
class ExperimentConfig:
    suite: str = "classic12-multi5"
    dimension: int = 10
    algorithms: tuple[str, ...] = ("de1", "de2", "de3")
    # optional per-algorithm overrides: {"de4": {"strategy": ..., "F": ..., "Cr": ...}}
    algorithm_params: dict = field(default_factory=dict)
    budget_factor: int = 500
    runs: int = 30
    sample_factor: int = 800
    repetitions: int = 30
    sampler: str = "ImprovedLHS"
    thresholds: tuple[float, ...] = (0.5, 0.7, 0.9)
    portfolios: tuple[int, ...] = (10, 30)
    aggregation: str = "weighted_mean"
    normalize: str = "min_max_on_train"
    target_statistic: str = "median"
    importance_repeats: int = 5
    grid: dict = field(default_factory=lambda: {k: list(v) for k, v in PARAM_GRID.items()})
    master_seed: int = 0
    instance_seed: int = 0
    rotated_classes: tuple[int, ...] = ()

    def __post_init__(self):
        self.algorithms = tuple(self.algorithms)
        self.thresholds = tuple(float(t) for t in self.thresholds)
        self.portfolios = tuple(int(p) for p in self.portfolios)
        self.rotated_classes = tuple(int(c) for c in self.rotated_classes)
        if self.suite not in SUITES:
            raise ValueError(f"unknown suite {self.suite!r}")
        if not self.algorithms:
            raise ValueError("at least one algorithm is required")
        for alg in self.algorithms:
            if alg not in NAMED_CONFIGS and alg not in self.algorithm_params:
                raise ValueError(f"algorithm {alg!r} needs parameters in algorithm_params")
        for alg, p in self.algorithm_params.items():
            if p.get("strategy") not in STRATEGIES:
                raise ValueError(f"algorithm {alg!r}: strategy must be one of {STRATEGIES}")
        if any(b <= a for a, b in zip(self.thresholds, self.thresholds[1:])):
            raise ValueError("thresholds must be strictly increasing")
        if not self.portfolios or any(p <= 0 for p in self.portfolios):
            raise ValueError("portfolios must be positive integers")
        if self.aggregation not in AGGREGATIONS:
            raise ValueError(f"aggregation must be one of {AGGREGATIONS}")
        if self.normalize not in NORMALIZATIONS:
            raise ValueError(f"normalize must be one of {NORMALIZATIONS}")
        if self.target_statistic not in TARGET_STATISTICS:
            raise ValueError(f"target_statistic must be one of {TARGET_STATISTICS}")
        if self.sampler not in SAMPLERS:
            raise ValueError(f"sampler must be one of {SAMPLERS}")
        for name in ("dimension", "budget_factor", "runs", "sample_factor", "repetitions",
                     "importance_repeats"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        missing = set(PARAM_GRID) - set(self.grid)
        if missing:
            raise ValueError(f"grid lacks {sorted(missing)}")
        param_grid(self.grid)  # validates every entry

    # derived seeds keep the three stages independent of one another
    @property
    def optimize_seed(self) -> int:
        return derive_seed(self.master_seed, 1)

    @property
    def features_seed(self) -> int:
        return derive_seed(self.master_seed, 2)

    @property
    def model_seed(self) -> int:
        return derive_seed(self.master_seed, 3)

    def de_config(self, algorithm_id: str) -> DEConfig:
        p = self.algorithm_params.get(algorithm_id) or dict(zip(("strategy", "F", "Cr"),
                                                                NAMED_CONFIGS[algorithm_id]))
        return DEConfig(algorithm_id, p["strategy"], float(p["F"]), float(p["Cr"]),
                        population_size=max(self.dimension, MIN_POPULATION),
                        budget=self.budget_factor * self.dimension,
                        runs=self.runs, seed=self.optimize_seed)

    def hyper_grid(self) -> list[HyperParams]:
        return param_grid(self.grid)

    def similarity_configs(self) -> list[SimilarityConfig]:
        return [SimilarityConfig(t, self.aggregation, self.normalize) for t in self.thresholds]

    def to_dict(self) -> dict:
        d = asdict(self)
        for k in ("algorithms", "thresholds", "portfolios", "rotated_classes"):
            d[k] = list(d[k])
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ValueError(f"unknown config keys: {unknown}")
        return cls(**dict(d))


def load_config(path: str | Path, overrides: Mapping | None = None) -> ExperimentConfig:
    """Read a JSON config; keys in ``overrides`` fill in only what the file leaves out."""
    with open(path) as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise ValueError(f"{path}: config must be a JSON object")
    merged = dict(overrides or {})
    merged.update(data)
    return ExperimentConfig.from_dict(merged)
