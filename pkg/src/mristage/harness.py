"""Evaluation protocols: leave-one-out, repeated hold-out, learning curves.

Every protocol unit (fold, repetition, curve point) derives its own
sub-seed as master seed + unit index, picks hyperparameters by random
search over a log-uniform box with patience-based stopping, retrains on
the unit's full training side, and records test predictions by id. Units
are independent, so they may run in parallel without changing output.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial

import numpy as np

from . import __version__
from .data import Dataset, DataError, _largest_remainder, loo_folds, nested_subsets, stratified_split
from .metrics import MetricsReport, build_report, mean_reports, report_to_dict
from .multiclass import HyperParams, MulticlassModel, predict_batch, train_multiclass
from .svm import TrainConfig


@dataclass(frozen=True)
class SearchSpace:
    """Log-uniform box for (C, gamma) with a trial budget and patience."""

    c_range: tuple[float, float] = (1e-2, 1e3)
    gamma_range: tuple[float, float] = (1e-6, 1e1)
    budget: int = 30
    patience: int = 10

    def __post_init__(self):
        for name, (lo, hi) in (("c_range", self.c_range), ("gamma_range", self.gamma_range)):
            if not (0 < lo <= hi) or not math.isfinite(hi):
                raise DataError(f"{name} must satisfy 0 < low <= high, got ({lo}, {hi})")
        if self.budget < 1:
            raise DataError("budget must be >= 1")
        if self.patience < 1:
            raise DataError("patience must be >= 1")


@dataclass(frozen=True)
class PredictionRow:
    id: str
    true_label: str
    predicted_label: str


@dataclass(frozen=True)
class UnitResult:
    unit: int
    hyperparams: HyperParams
    validation_score: float
    predictions: tuple[PredictionRow, ...]


@dataclass(frozen=True)
class CurvePoint:
    fraction: float
    train_accuracy: float
    test_accuracy: float


@dataclass(frozen=True)
class EvaluationReport:
    protocol: dict
    seed: int
    units: tuple[UnitResult, ...]
    metrics: MetricsReport | None
    curve: tuple[CurvePoint, ...] = ()

    def to_dict(self) -> dict:
        doc = {
            "tool": "mristage",
            "tool_version": __version__,
            "protocol": self.protocol,
            "seed": self.seed,
            "units": [
                {
                    "unit": u.unit,
                    "hyperparams": {"C": u.hyperparams.C, "gamma": u.hyperparams.gamma},
                    "validation_score": u.validation_score,
                    "predictions": [
                        {"id": p.id, "true": p.true_label, "predicted": p.predicted_label}
                        for p in u.predictions
                    ],
                }
                for u in self.units
            ],
        }
        if self.metrics is not None:
            doc["metrics"] = report_to_dict(self.metrics)
        if self.curve:
            doc["curve"] = [
                {
                    "fraction": p.fraction,
                    "train_accuracy": p.train_accuracy,
                    "test_accuracy": p.test_accuracy,
                }
                for p in self.curve
            ]
        return doc

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"


def _sample_log_uniform(rng: np.random.Generator, lo: float, hi: float) -> float:
    if lo == hi:
        return lo
    return float(np.exp(rng.uniform(np.log(lo), np.log(hi))))


def _carve_validation(train: Dataset, size: int, rng: np.random.Generator):
    """Split off `size` validation records, keeping every class in the
    remainder whenever counts allow; otherwise carve without stratifying."""
    n = len(train)
    by_class: dict[str, list[int]] = {cls: [] for cls in train.schema}
    for i, rec in enumerate(train.records):
        by_class[rec.label].append(i)
    counts = [len(by_class[cls]) for cls in train.schema]
    k = len(counts)

    if n - size >= k and all(c >= 1 for c in counts):
        alloc = _largest_remainder(counts, size)
        overflow = 0
        for i in range(k):
            if alloc[i] >= counts[i]:
                overflow += alloc[i] - (counts[i] - 1)
                alloc[i] = counts[i] - 1
        if overflow:
            quotas = [c * size / n for c in counts]
            order = sorted(range(k), key=lambda i: (alloc[i] - quotas[i], i))
            for i in order:
                spare = counts[i] - 1 - alloc[i]
                take = min(spare, overflow)
                alloc[i] += take
                overflow -= take
                if overflow == 0:
                    break
        val_idx: list[int] = []
        for cls, take in zip(train.schema, alloc):
            pos = by_class[cls]
            perm = rng.permutation(len(pos))
            val_idx.extend(pos[p] for p in perm[:take])
    else:
        perm = rng.permutation(n)
        val_idx = [int(p) for p in perm[:size]]

    val_set = set(val_idx)
    rest_idx = [i for i in range(n) if i not in val_set]
    return train.subset(rest_idx), train.subset(sorted(val_idx))


def validation_size(n_train: int) -> int:
    """1% of the training side, rounded up, never less than one record."""
    return max(1, math.ceil(0.01 * n_train))


def random_search(train: Dataset, space: SearchSpace, seed: int,
                  config: TrainConfig | None = None) -> tuple[HyperParams, float]:
    """Best (C, gamma) by validation macro-average recall.

    Carves the validation set once, then samples configurations until the
    budget runs out or `patience` consecutive trials fail to improve the
    best score. Ties keep the earlier configuration.
    """
    n = len(train)
    if n < 2:
        raise DataError(f"random search needs at least 2 training records, got {n}")
    rng = np.random.default_rng(seed)
    rest, val = _carve_validation(train, validation_size(n), rng)

    best_hp: HyperParams | None = None
    best_score = -math.inf
    since_improved = 0
    for _ in range(space.budget):
        hp = HyperParams(
            C=_sample_log_uniform(rng, *space.c_range),
            gamma=_sample_log_uniform(rng, *space.gamma_range),
        )
        model = train_multiclass(rest, hp, seed=seed, config=config)
        predicted = [row[1] for row in predict_batch(model, val)]
        score = build_report(val.labels, predicted, train.schema).average.recall
        if score > best_score:
            best_hp, best_score = hp, score
            since_improved = 0
        else:
            since_improved += 1
            if since_improved >= space.patience:
                break
    assert best_hp is not None
    return best_hp, best_score


def _check_min_class_count(dataset: Dataset, minimum: int) -> None:
    for cls, cnt in dataset.class_counts().items():
        if cnt < minimum:
            raise DataError(
                f"class {cls!r} has {cnt} record(s); protocol needs at least {minimum}"
            )


def _assert_no_leakage(train: Dataset, test_ids) -> None:
    overlap = set(train.ids) & set(test_ids)
    if overlap:
        raise AssertionError(f"test ids leaked into training: {sorted(overlap)[:5]}")


def _loo_unit(dataset: Dataset, space: SearchSpace, seed: int,
              config: TrainConfig | None, k: int) -> UnitResult:
    n = len(dataset)
    train = dataset.subset([i for i in range(n) if i != k])
    held_out = dataset.records[k]
    sub_seed = seed + k
    hp, score = random_search(train, space, sub_seed, config)
    model = train_multiclass(train, hp, seed=sub_seed, config=config)
    _assert_no_leakage(train, [held_out.id])
    rows = predict_batch(model, dataset.subset([k]))
    preds = tuple(PredictionRow(rid, held_out.label, predicted) for rid, predicted, _ in rows)
    return UnitResult(unit=k, hyperparams=hp, validation_score=score, predictions=preds)


def _parallel(fn, indices, jobs: int):
    if jobs <= 1 or len(indices) <= 1:
        return [fn(i) for i in indices]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, indices))


def run_loo(dataset: Dataset, space: SearchSpace | None = None, seed: int = 0,
            jobs: int = 1, config: TrainConfig | None = None) -> EvaluationReport:
    """Leave-one-out: search + retrain per fold, metrics from pooled predictions."""
    if len(dataset) < 2:
        raise DataError("leave-one-out needs at least 2 records")
    _check_min_class_count(dataset, 2)
    space = space or SearchSpace()
    worker = partial(_loo_unit, dataset, space, seed, config)
    units = _parallel(worker, list(range(len(dataset))), jobs)
    y_true = [p.true_label for u in units for p in u.predictions]
    y_pred = [p.predicted_label for u in units for p in u.predictions]
    metrics = build_report(y_true, y_pred, dataset.schema)
    return EvaluationReport(
        protocol={"name": "loo", "folds": len(dataset)},
        seed=seed,
        units=tuple(units),
        metrics=metrics,
    )


def _holdout_unit(dataset: Dataset, space: SearchSpace, seed: int,
                  test_fraction: float, config: TrainConfig | None,
                  r: int) -> tuple[UnitResult, MetricsReport]:
    sub_seed = seed + r
    train, test = stratified_split(dataset, test_fraction, sub_seed)
    for cls, cnt in train.class_counts().items():
        if cnt == 0:
            raise DataError(f"repetition {r}: class {cls!r} absent from the training split")
    hp, score = random_search(train, space, sub_seed, config)
    model = train_multiclass(train, hp, seed=sub_seed, config=config)
    _assert_no_leakage(train, test.ids)
    rows = predict_batch(model, test)
    truth = {rec.id: rec.label for rec in test.records}
    preds = tuple(PredictionRow(rid, truth[rid], predicted) for rid, predicted, _ in rows)
    report = build_report([p.true_label for p in preds],
                          [p.predicted_label for p in preds], dataset.schema)
    return UnitResult(unit=r, hyperparams=hp, validation_score=score, predictions=preds), report


def run_repeated_holdout(dataset: Dataset, repetitions: int = 50,
                         train_fraction: float = 0.8,
                         space: SearchSpace | None = None, seed: int = 0,
                         jobs: int = 1, config: TrainConfig | None = None) -> EvaluationReport:
    """Repeated stratified hold-out; aggregate is the mean of per-repetition reports."""
    if repetitions < 1:
        raise DataError("repetitions must be >= 1")
    if not 0.0 < train_fraction < 1.0:
        raise DataError(f"train_fraction must be in (0,1), got {train_fraction}")
    _check_min_class_count(dataset, 2)
    space = space or SearchSpace()
    worker = partial(_holdout_unit, dataset, space, seed, 1.0 - train_fraction, config)
    results = _parallel(worker, list(range(repetitions)), jobs)
    units = tuple(u for u, _ in results)
    aggregate = mean_reports([rep for _, rep in results])
    return EvaluationReport(
        protocol={
            "name": "holdout",
            "repetitions": repetitions,
            "train_fraction": train_fraction,
        },
        seed=seed,
        units=units,
        metrics=aggregate,
    )


def default_curve_fractions() -> list[float]:
    return [k / 10 for k in range(1, 8)]


def _curve_unit(slices: list[Dataset], fractions: list[float], test: Dataset,
                space: SearchSpace, seed: int, config: TrainConfig | None,
                p: int) -> tuple[CurvePoint, UnitResult]:
    fraction = fractions[p]
    subset = slices[p]
    for cls, cnt in subset.class_counts().items():
        if cnt == 0:
            raise DataError(f"fraction {fraction:g}: class {cls!r} absent from the slice")
    sub_seed = seed + p
    hp, score = random_search(subset, space, sub_seed, config)
    model = train_multiclass(subset, hp, seed=sub_seed, config=config)
    _assert_no_leakage(subset, test.ids)
    train_rows = predict_batch(model, subset)
    train_truth = {rec.id: rec.label for rec in subset.records}
    train_acc = sum(1 for rid, pred, _ in train_rows if pred == train_truth[rid]) / len(train_rows)
    test_rows = predict_batch(model, test)
    test_truth = {rec.id: rec.label for rec in test.records}
    test_acc = sum(1 for rid, pred, _ in test_rows if pred == test_truth[rid]) / len(test_rows)
    preds = tuple(PredictionRow(rid, test_truth[rid], pred) for rid, pred, _ in test_rows)
    point = CurvePoint(fraction=fraction, train_accuracy=train_acc, test_accuracy=test_acc)
    return point, UnitResult(unit=p, hyperparams=hp, validation_score=score, predictions=preds)


def run_learning_curve(dataset: Dataset, fractions=None,
                       space: SearchSpace | None = None, seed: int = 0,
                       jobs: int = 1, config: TrainConfig | None = None) -> EvaluationReport:
    """Accuracy vs training-set size over nested stratified slices.

    A stratified 20% test partition is carved once and reused for every
    point; slices are nested subsets of the remaining 80%.
    """
    fractions = list(fractions) if fractions is not None else default_curve_fractions()
    if not all(0.0 < f < 1.0 for f in fractions):
        raise DataError("curve fractions must lie in (0, 1)")
    for a, b in zip(fractions, fractions[1:]):
        if not a < b:
            raise DataError("curve fractions must be strictly increasing")
    space = space or SearchSpace()
    pool, test = stratified_split(dataset, 0.2, seed)
    slices = nested_subsets(pool, fractions, seed)
    worker = partial(_curve_unit, slices, fractions, test, space, seed, config)
    results = _parallel(worker, list(range(len(fractions))), jobs)
    points = tuple(pt for pt, _ in results)
    units = tuple(u for _, u in results)
    return EvaluationReport(
        protocol={"name": "learning_curve", "fractions": fractions},
        seed=seed,
        units=units,
        metrics=None,
        curve=points,
    )


def learning_curve(dataset: Dataset, fractions=None, space: SearchSpace | None = None,
                   seed: int = 0, jobs: int = 1,
                   config: TrainConfig | None = None) -> list[CurvePoint]:
    """The curve points alone; see run_learning_curve for the full report."""
    report = run_learning_curve(dataset, fractions, space, seed, jobs, config)
    return list(report.curve)


def curve_csv(points) -> str:
    lines = ["fraction,train_accuracy,test_accuracy"]
    for p in points:
        lines.append(f"{p.fraction:g},{p.train_accuracy!r},{p.test_accuracy!r}")
    return "\n".join(lines) + "\n"
