"""CSV and JSON interchange between pipeline stages.

Every file starts with a provenance comment carrying the tool version and
master seed. Floats are written with ``repr`` so they read back bit-exact.
"""

from __future__ import annotations

import csv
import json
from collections import defaultdict
from pathlib import Path
from typing import Iterable, Sequence

from . import __version__
from .de import PerformanceRecord
from .landscape.extract import FeatureVector
from .landscape.features import FEATURE_NAMES

PERF_COLUMNS = ["suite", "class_id", "instance_id", "algorithm_id", "run_index", "precision"]
AGG_COLUMNS = ["suite", "class_id", "instance_id", "algorithm_id", "median_precision",
               "log_median_precision"]
FLAG_PREFIX = "flag_"


def header_line(seed: int) -> str:
    return f"# rfclust {__version__} seed={seed}"


def fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_csv(path: str | Path, seed: int, columns: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(header_line(seed) + "\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([fmt(v) for v in row])
    return path


def read_csv(path: str | Path) -> tuple[dict, list[dict]]:
    """Return (header metadata, rows as dicts); comment lines are skipped."""
    meta = {}
    with open(path, newline="") as fh:
        lines = []
        for line in fh:
            if line.startswith("#"):
                meta.update(_parse_header(line))
            else:
                lines.append(line)
    return meta, list(csv.DictReader(lines))


def _parse_header(line: str) -> dict:
    out = {}
    for token in line.lstrip("#").split():
        if "=" in token:
            k, v = token.split("=", 1)
            out[k] = v
    return out


def write_json(path: str | Path, seed: int, payload: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump({"#": header_line(seed), **payload}, fh, indent=1)
        fh.write("\n")
    return path


def read_json(path: str | Path) -> dict:
    with open(path) as fh:
        data = json.load(fh)
    data.pop("#", None)
    return data


def write_jsonl(path: str | Path, seed: int, records: Iterable[dict]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        fh.write(json.dumps({"#": header_line(seed)}) + "\n")
        for rec in records:
            fh.write(json.dumps(rec) + "\n")
    return path


def aggregate_path(perf_path: str | Path) -> Path:
    p = Path(perf_path)
    return p.with_name(p.stem + "_aggregate" + p.suffix)


def write_performance(path: str | Path, seed: int, records: Sequence[PerformanceRecord]) -> tuple[Path, Path]:
    """Per-run CSV at ``path`` and the per-instance aggregate next to it."""
    records = sorted(records, key=lambda r: (r.suite, r.class_id, r.instance_id, r.algorithm_id))
    runs = [(r.suite, r.class_id, r.instance_id, r.algorithm_id, i, float(p))
            for r in records for i, p in enumerate(r.run_precisions)]
    agg = [(r.suite, r.class_id, r.instance_id, r.algorithm_id, r.median_precision,
            r.log_median_precision) for r in records]
    return (write_csv(path, seed, PERF_COLUMNS, runs),
            write_csv(aggregate_path(path), seed, AGG_COLUMNS, agg))


def read_performance(path: str | Path) -> list[PerformanceRecord]:
    _, rows = read_csv(path)
    if rows and set(PERF_COLUMNS) - set(rows[0]):
        raise ValueError(f"{path}: expected columns {PERF_COLUMNS}")
    grouped: dict[tuple, list] = defaultdict(list)
    for row in rows:
        key = (row["suite"], int(row["class_id"]), int(row["instance_id"]), row["algorithm_id"])
        grouped[key].append((int(row["run_index"]), float(row["precision"])))
    out = []
    for (suite, cid, iid, alg), runs in sorted(grouped.items()):
        out.append(PerformanceRecord(alg, suite, cid, iid, [p for _, p in sorted(runs)]))
    return out


def write_features(path: str | Path, seed: int, vectors: Sequence[FeatureVector]) -> Path:
    columns = (["suite", "class_id", "instance_id"] + list(FEATURE_NAMES)
               + [FLAG_PREFIX + n for n in FEATURE_NAMES])
    vectors = sorted(vectors, key=lambda v: (v.suite, v.class_id, v.instance_id))
    rows = ([v.suite, v.class_id, v.instance_id]
            + [float(v.values[n]) for n in FEATURE_NAMES]
            + [int(v.flags.get(n, 0)) for n in FEATURE_NAMES] for v in vectors)
    return write_csv(path, seed, columns, rows)


def read_features(path: str | Path) -> list[FeatureVector]:
    _, rows = read_csv(path)
    out = []
    for row in rows:
        names = [c for c in row if c not in ("suite", "class_id", "instance_id")
                 and not c.startswith(FLAG_PREFIX)]
        values = {n: float(row[n]) for n in names}
        flags = {c[len(FLAG_PREFIX):]: int(row[c]) for c in row if c.startswith(FLAG_PREFIX)}
        out.append(FeatureVector(row["suite"], int(row["class_id"]), int(row["instance_id"]),
                                 values, flags))
    return out
