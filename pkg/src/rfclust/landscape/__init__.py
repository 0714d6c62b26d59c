"""Landscape feature extraction."""

from .extract import DesignPool, FeatureVector, SampleDesign, compute_features, compute_suite_features
from .features import (
    FEATURE_NAMES,
    Features,
    feature_group_disp,
    feature_group_distr,
    feature_group_ic,
    feature_group_meta,
    feature_group_nbc,
    feature_group_pca,
)
from .sampling import lhs_sample

__all__ = [
    "DesignPool", "FeatureVector", "SampleDesign", "compute_features", "compute_suite_features",
    "FEATURE_NAMES", "Features", "feature_group_disp", "feature_group_distr", "feature_group_ic",
    "feature_group_meta", "feature_group_nbc", "feature_group_pca", "lhs_sample",
]
