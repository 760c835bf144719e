"""Feature tables with demographics: ingestion, encoding, class weights, splits.

A table is a set of subject records, each holding a feature vector of
length d plus sex, age, and a stage label drawn from an ordered class
schema. Binary tables live on disk as a JSON manifest next to a raw
little-endian float32 payload; small fixtures may use CSV instead.
"""

from __future__ import annotations

import csv
import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

SEX_CODES = {"F": 0.0, "M": 1.0}
MAX_AGE = 130.0
ZERO_VARIANCE = 1e-12


class DataError(ValueError):
    """Malformed table, label, or split request."""


@dataclass(frozen=True)
class FeatureRecord:
    """One subject: feature vector plus sex, age, and stage label."""

    id: str
    features: np.ndarray
    sex: str
    age: float
    label: str

    def __post_init__(self):
        feats = np.asarray(self.features)
        if feats.ndim != 1 or feats.size < 1:
            raise DataError(f"record {self.id!r}: features must be a non-empty vector")
        if not np.all(np.isfinite(feats)):
            raise DataError(f"record {self.id!r}: non-finite feature value")
        if self.sex not in SEX_CODES:
            raise DataError(f"record {self.id!r}: sex must be 'F' or 'M', got {self.sex!r}")
        if not math.isfinite(self.age) or not 0.0 <= float(self.age) <= MAX_AGE:
            raise DataError(f"record {self.id!r}: age {self.age!r} outside [0, {MAX_AGE:g}]")
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "age", float(self.age))


@dataclass(frozen=True)
class Dataset:
    """Ordered collection of records sharing one dimension and class schema."""

    records: tuple[FeatureRecord, ...]
    dim: int
    schema: tuple[str, ...]
    provenance: str = ""

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        object.__setattr__(self, "schema", tuple(self.schema))
        if len(self.schema) < 2:
            raise DataError("schema needs at least 2 classes")
        if len(set(self.schema)) != len(self.schema):
            raise DataError("schema has duplicate class names")
        seen = set()
        for rec in self.records:
            if rec.features.size != self.dim:
                raise DataError(
                    f"record {rec.id!r}: {rec.features.size} features, expected {self.dim}"
                )
            if rec.id in seen:
                raise DataError(f"duplicate record id {rec.id!r}")
            seen.add(rec.id)
            if rec.label not in self.schema:
                raise DataError(f"record {rec.id!r}: label {rec.label!r} not in schema")

    def __len__(self) -> int:
        return len(self.records)

    @property
    def labels(self) -> list[str]:
        return [rec.label for rec in self.records]

    @property
    def ids(self) -> list[str]:
        return [rec.id for rec in self.records]

    def class_counts(self) -> dict[str, int]:
        counts = {cls: 0 for cls in self.schema}
        for rec in self.records:
            counts[rec.label] += 1
        return counts

    def subset(self, indices) -> "Dataset":
        recs = tuple(self.records[i] for i in indices)
        return Dataset(recs, self.dim, self.schema, self.provenance)


@dataclass(frozen=True)
class Standardizer:
    """Per-column center and scale, fitted on training rows only."""

    mean: np.ndarray
    scale: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float)
        scale = np.asarray(self.scale, dtype=float)
        if mean.shape != scale.shape or mean.ndim != 1:
            raise DataError("standardizer mean/scale must be 1-D and the same length")
        if not np.all(scale > 0):
            raise DataError("standardizer scale values must be strictly positive")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "scale", scale)

    def __len__(self) -> int:
        return self.mean.size


@dataclass(frozen=True)
class ClassWeights:
    """Per-class balancing weights: N / (K * count(c))."""

    weights: dict[str, float]

    def weight(self, label: str) -> float:
        return self.weights[label]

    def for_labels(self, labels) -> np.ndarray:
        return np.array([self.weights[lab] for lab in labels], dtype=float)


def sex_code(sex: str) -> float:
    try:
        return SEX_CODES[sex]
    except KeyError:
        raise DataError(f"sex must be 'F' or 'M', got {sex!r}") from None


def concat_demographics(record: FeatureRecord) -> np.ndarray:
    """Feature vector extended with [sex_code, age]; length d+2."""
    out = np.empty(record.features.size + 2, dtype=float)
    out[:-2] = record.features
    out[-2] = sex_code(record.sex)
    out[-1] = record.age
    return out


def design_matrix(dataset: Dataset) -> np.ndarray:
    """All records as rows of concat_demographics output, shape (n, d+2)."""
    out = np.empty((len(dataset), dataset.dim + 2), dtype=float)
    for i, rec in enumerate(dataset.records):
        out[i, :-2] = rec.features
        out[i, -2] = sex_code(rec.sex)
        out[i, -1] = rec.age
    return out


def class_weights(labels, schema) -> ClassWeights:
    """Balancing weights proportional to inverse class frequency.

    weight(c) = N / (K * count(c)), so weight(c) * count(c) is the same
    for every class and the weighted counts sum back to N.
    """
    labels = list(labels)
    if not labels:
        raise DataError("cannot compute class weights from empty labels")
    counts = {cls: 0 for cls in schema}
    for lab in labels:
        if lab not in counts:
            raise DataError(f"label {lab!r} not in schema")
        counts[lab] += 1
    for cls, cnt in counts.items():
        if cnt == 0:
            raise DataError(f"class {cls!r} absent from labels; weight undefined")
    n = len(labels)
    k = len(counts)
    return ClassWeights({cls: n / (k * cnt) for cls, cnt in counts.items()})


def fit_standardizer(rows) -> Standardizer:
    """Per-column mean and population stddev; constant columns get scale 1."""
    X = np.asarray(rows, dtype=float)
    if X.ndim != 2 or X.shape[0] < 1:
        raise DataError("fit_standardizer needs at least one row")
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    scale = np.where(std < ZERO_VARIANCE, 1.0, std)
    return Standardizer(mean, scale)


def apply_standardizer(std: Standardizer, row) -> np.ndarray:
    """(row - mean) / scale; accepts a single row or a matrix of rows."""
    X = np.asarray(row, dtype=float)
    if X.shape[-1] != len(std):
        raise DataError(f"row length {X.shape[-1]} != standardizer length {len(std)}")
    return (X - std.mean) / std.scale


def round_half_up(x: float) -> int:
    """Round to nearest integer with halves going up, on the float product."""
    return int(math.floor(x + 0.5))


def _largest_remainder(counts: list[int], total: int) -> list[int]:
    """Apportion `total` slots across classes proportionally to `counts`.

    Floors the proportional quotas, then hands leftover slots to the
    largest fractional remainders (ties broken by class position). Each
    allocation differs from its quota by less than one.
    """
    n = sum(counts)
    if not 0 <= total <= n:
        raise DataError(f"cannot apportion {total} among {n} records")
    quotas = [c * total / n for c in counts]
    alloc = [min(math.floor(q), c) for q, c in zip(quotas, counts)]
    order = sorted(range(len(counts)), key=lambda i: (alloc[i] - quotas[i], i))
    leftover = total - sum(alloc)
    k = 0
    while leftover > 0:
        i = order[k % len(order)]
        if alloc[i] < counts[i]:
            alloc[i] += 1
            leftover -= 1
        k += 1
    return alloc


def _class_positions(dataset: Dataset) -> dict[str, list[int]]:
    by_class: dict[str, list[int]] = {cls: [] for cls in dataset.schema}
    for i, rec in enumerate(dataset.records):
        by_class[rec.label].append(i)
    return by_class


def stratified_split(dataset: Dataset, test_fraction: float, seed: int):
    """Split into (train, test) with per-class largest-remainder test quotas.

    Test size is round-half-up of N * test_fraction. Record order within
    each side follows the dataset order. Deterministic given the seed.
    """
    if not 0.0 < test_fraction < 1.0:
        raise DataError(f"test_fraction must be in (0,1), got {test_fraction}")
    n = len(dataset)
    by_class = _class_positions(dataset)
    for cls, pos in by_class.items():
        if not pos:
            raise DataError(f"class {cls!r} has no records; cannot stratify")
    total = round_half_up(n * test_fraction)
    if total == 0 or total == n:
        raise DataError(f"test_fraction {test_fraction} leaves an empty side for n={n}")
    counts = [len(by_class[cls]) for cls in dataset.schema]
    alloc = _largest_remainder(counts, total)
    rng = np.random.default_rng(seed)
    test_idx: list[int] = []
    for cls, take in zip(dataset.schema, alloc):
        pos = by_class[cls]
        perm = rng.permutation(len(pos))
        test_idx.extend(pos[p] for p in perm[:take])
    test_set = set(test_idx)
    train_idx = [i for i in range(n) if i not in test_set]
    return dataset.subset(train_idx), dataset.subset(sorted(test_idx))


def loo_folds(dataset: Dataset):
    """All (train, held-out record) pairs, one per record."""
    n = len(dataset)
    if n < 2:
        raise DataError(f"leave-one-out needs at least 2 records, got {n}")
    folds = []
    for k in range(n):
        train = dataset.subset([i for i in range(n) if i != k])
        folds.append((train, dataset.records[k]))
    return folds


def nested_subsets(dataset: Dataset, fractions, seed: int) -> list[Dataset]:
    """Stratified subsets of sizes round(N*f), each containing the previous.

    Per-class allocations follow the same largest-remainder apportionment
    as stratified_split; when growing the subset would shrink a class's
    quota (rounding artifact), the class keeps its previous take and the
    difference comes out of the most over-quota classes, so nesting holds.
    """
    fractions = list(fractions)
    if not fractions:
        raise DataError("need at least one fraction")
    for a, b in zip(fractions, fractions[1:]):
        if not a < b:
            raise DataError("fractions must be strictly increasing")
    if not all(0.0 < f <= 1.0 for f in fractions):
        raise DataError("fractions must lie in (0, 1]")

    n = len(dataset)
    by_class = _class_positions(dataset)
    for cls, pos in by_class.items():
        if not pos:
            raise DataError(f"class {cls!r} has no records; cannot stratify")
    counts = [len(by_class[cls]) for cls in dataset.schema]

    rng = np.random.default_rng(seed)
    perms = {}
    for cls in dataset.schema:
        pos = by_class[cls]
        perm = rng.permutation(len(pos))
        perms[cls] = [pos[p] for p in perm]

    subsets = []
    prev = [0] * len(counts)
    for f in fractions:
        total = round_half_up(n * f)
        if total == 0:
            raise DataError(f"fraction {f} produces an empty subset for n={n}")
        alloc = _largest_remainder(counts, total)
        deficit = 0
        for i in range(len(alloc)):
            if alloc[i] < prev[i]:
                deficit += prev[i] - alloc[i]
                alloc[i] = prev[i]
        if deficit:
            quotas = [c * total / n for c in counts]
            order = sorted(
                range(len(alloc)), key=lambda i: (quotas[i] - alloc[i], i)
            )
            for i in order:
                while deficit and alloc[i] > prev[i]:
                    alloc[i] -= 1
                    deficit -= 1
        idx: list[int] = []
        for cls, take in zip(dataset.schema, alloc):
            idx.extend(perms[cls][:take])
        subsets.append(dataset.subset(sorted(idx)))
        prev = alloc
    return subsets


# --- Feature-Table Format -------------------------------------------------

MANIFEST_VERSION = 1


def _atomic_write_bytes(path: Path, data: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _atomic_write_text(path: Path, text: str) -> None:
    _atomic_write_bytes(path, text.encode("utf-8"))


def load_dataset(manifest_path) -> Dataset:
    """Read a manifest + float32 payload pair into a Dataset."""
    manifest_path = Path(manifest_path)
    if not manifest_path.is_file():
        raise DataError(f"manifest not found: {manifest_path}")
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"manifest {manifest_path}: invalid JSON ({exc})") from exc

    for key in ("version", "n", "d", "dtype", "byte_order", "layout",
                "features_file", "schema", "records"):
        if key not in manifest:
            raise DataError(f"manifest {manifest_path}: missing key {key!r}")
    if manifest["version"] != MANIFEST_VERSION:
        raise DataError(f"unsupported manifest version {manifest['version']}")
    if manifest["dtype"] != "f32":
        raise DataError(f"unsupported dtype {manifest['dtype']!r}")
    if manifest["byte_order"] != "little":
        raise DataError(f"unsupported byte_order {manifest['byte_order']!r}")
    if manifest["layout"] != "row-major":
        raise DataError(f"unsupported layout {manifest['layout']!r}")

    n = int(manifest["n"])
    d = int(manifest["d"])
    rows_meta = manifest["records"]
    if len(rows_meta) != n:
        raise DataError(f"manifest declares n={n} but lists {len(rows_meta)} records")

    payload_path = manifest_path.parent / manifest["features_file"]
    if not payload_path.is_file():
        raise DataError(f"features payload not found: {payload_path}")
    payload = payload_path.read_bytes()
    expected = 4 * n * d
    if len(payload) < expected:
        raise DataError(
            f"features payload too short: {len(payload)} bytes, expected {expected}"
        )
    if len(payload) != expected:
        raise DataError(
            f"features payload size mismatch: {len(payload)} bytes, expected {expected}"
        )
    matrix = np.frombuffer(payload, dtype="<f4").reshape(n, d)

    records = []
    for i, meta in enumerate(rows_meta):
        records.append(
            FeatureRecord(
                id=str(meta["id"]),
                features=matrix[i],
                sex=meta["sex"],
                age=float(meta["age"]),
                label=meta["label"],
            )
        )
    return Dataset(
        records=tuple(records),
        dim=d,
        schema=tuple(manifest["schema"]),
        provenance=str(manifest_path),
    )


def write_dataset(dataset: Dataset, manifest_path, features_file: str | None = None) -> None:
    """Write a Dataset as manifest JSON plus float32 payload (atomically)."""
    manifest_path = Path(manifest_path)
    if features_file is None:
        features_file = manifest_path.stem + ".f32"
    matrix = np.empty((len(dataset), dataset.dim), dtype="<f4")
    for i, rec in enumerate(dataset.records):
        matrix[i] = rec.features
    manifest = {
        "version": MANIFEST_VERSION,
        "n": len(dataset),
        "d": dataset.dim,
        "dtype": "f32",
        "byte_order": "little",
        "layout": "row-major",
        "features_file": features_file,
        "schema": list(dataset.schema),
        "records": [
            {"id": rec.id, "label": rec.label, "sex": rec.sex, "age": rec.age}
            for rec in dataset.records
        ],
    }
    _atomic_write_bytes(manifest_path.parent / features_file, matrix.tobytes(order="C"))
    _atomic_write_text(manifest_path, json.dumps(manifest, indent=2) + "\n")


def load_csv_dataset(csv_path, schema=None) -> Dataset:
    """Read the CSV fixture form: id,label,sex,age,f0..f{d-1}.

    Without an explicit schema the class list follows first appearance
    order of the labels.
    """
    csv_path = Path(csv_path)
    if not csv_path.is_file():
        raise DataError(f"csv not found: {csv_path}")
    with open(csv_path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"csv {csv_path}: empty file") from None
        if header[:4] != ["id", "label", "sex", "age"]:
            raise DataError(f"csv {csv_path}: header must start with id,label,sex,age")
        d = len(header) - 4
        expected_cols = [f"f{i}" for i in range(d)]
        if header[4:] != expected_cols:
            raise DataError(f"csv {csv_path}: feature columns must be f0..f{d-1}")
        if d < 1:
            raise DataError(f"csv {csv_path}: no feature columns")
        records = []
        seen_labels: list[str] = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != 4 + d:
                raise DataError(f"csv {csv_path}:{lineno}: expected {4 + d} fields")
            rid, label, sex, age = row[:4]
            try:
                feats = np.array([float(v) for v in row[4:]], dtype="<f4")
                age_val = float(age)
            except ValueError as exc:
                raise DataError(f"csv {csv_path}:{lineno}: {exc}") from exc
            records.append(FeatureRecord(rid, feats, sex, age_val, label))
            if label not in seen_labels:
                seen_labels.append(label)
    if schema is None:
        schema = seen_labels
    return Dataset(tuple(records), d, tuple(schema), provenance=str(csv_path))
