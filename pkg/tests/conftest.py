import numpy as np
import pytest

from rfclust.de import PerformanceRecord
from rfclust.landscape.extract import FeatureVector
from rfclust.landscape.features import FEATURE_NAMES
from rfclust.lopo import Dataset, Row

_ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def accept():
    """Record a one-line PASS/FAIL verdict that is echoed in the terminal summary."""

    def record(number: int, title: str, ok: bool, detail: str) -> None:
        line = f"[acceptance {number:>2}] {'PASS' if ok else 'FAIL'}  {title}: {detail}"
        _ACCEPTANCE_LINES.append(line)
        print(line)

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def synthetic_dataset(n_classes=12, per_class=5, n_features=8, seed=0, noise=0.3) -> Dataset:
    """Class-clustered random features with a target that depends on them smoothly."""
    rng = np.random.default_rng(seed)
    names = [f"f{j}" for j in range(n_features)]
    w = rng.normal(size=n_features)
    rows = []
    for c in range(1, n_classes + 1):
        centre = rng.normal(size=n_features) * 2
        for i in range(1, per_class + 1):
            x = centre + noise * rng.normal(size=n_features)
            rows.append(Row("synthetic", c, i, dict(zip(names, x.tolist())),
                            float(np.tanh(x @ w / n_features) * 3 + 0.1 * rng.normal())))
    return Dataset(rows, names)


def synthetic_sources(n_classes=12, per_class=5, algorithms=("de1", "de2", "de3"), seed=0,
                      runs=3):
    """Feature vectors over the real feature names and matching performance records."""
    rng = np.random.default_rng(seed)
    vectors, records = [], []
    for c in range(1, n_classes + 1):
        centre = rng.normal(size=len(FEATURE_NAMES))
        for i in range(1, per_class + 1):
            vals = centre + 0.2 * rng.normal(size=len(FEATURE_NAMES))
            vectors.append(FeatureVector("synthetic", c, i, dict(zip(FEATURE_NAMES, vals.tolist())),
                                         dict.fromkeys(FEATURE_NAMES, 0)))
            for a, alg in enumerate(algorithms):
                level = 10.0 ** (-(c % 5) - a + vals[0])
                records.append(PerformanceRecord(alg, "synthetic", c, i,
                                                 (level * rng.uniform(0.5, 2, runs)).tolist()))
    return vectors, records


@pytest.fixture
def dataset():
    return synthetic_dataset()
