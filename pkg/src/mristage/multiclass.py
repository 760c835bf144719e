"""One-vs-rest multiclass wrapper: one weighted binary SVM per stage.

Each class gets a binary model trained on +1 (that class) vs -1 (all
others); per-sample cost caps are C times the balancing weight of the
sample's original class, so minority stages keep their influence in
every subproblem. Prediction is the argmax of the decision values.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import (
    Dataset,
    DataError,
    FeatureRecord,
    Standardizer,
    _atomic_write_text,
    apply_standardizer,
    class_weights,
    concat_demographics,
    design_matrix,
    fit_standardizer,
)
from .svm import (
    BinarySvmModel,
    KernelParams,
    SvmError,
    TrainConfig,
    load_model,
    save_model,
    smo_train,
)


@dataclass(frozen=True)
class HyperParams:
    """The two searched quantities: soft-margin cost and RBF width."""

    C: float
    gamma: float

    def __post_init__(self):
        if not (math.isfinite(self.C) and self.C > 0):
            raise SvmError(f"C must be finite and > 0, got {self.C!r}")
        if not (math.isfinite(self.gamma) and self.gamma > 0):
            raise SvmError(f"gamma must be finite and > 0, got {self.gamma!r}")


@dataclass
class MulticlassModel:
    """Per-class binary models plus the standardizer fitted on training rows."""

    schema: tuple[str, ...]
    models: tuple[BinarySvmModel, ...]
    standardizer: Standardizer
    hyperparams: HyperParams

    @property
    def dim(self) -> int:
        return len(self.standardizer) - 2


def train_multiclass(train: Dataset, hp: HyperParams, seed: int = 0,
                     config: TrainConfig | None = None) -> MulticlassModel:
    """Standardize, weight by class frequency, and fit one model per class."""
    counts = train.class_counts()
    for cls, cnt in counts.items():
        if cnt == 0:
            raise DataError(f"class {cls!r} absent from training data")
    rows = design_matrix(train)
    standardizer = fit_standardizer(rows)
    X = apply_standardizer(standardizer, rows)
    weights = class_weights(train.labels, train.schema)
    labels = train.labels
    base = config if config is not None else TrainConfig()
    cost = hp.C * weights.for_labels(labels)
    kernel = KernelParams(hp.gamma)

    models = []
    for k, cls in enumerate(train.schema):
        y = np.where(np.array(labels) == cls, 1.0, -1.0)
        cfg = TrainConfig(
            base_cost=hp.C,
            kkt_tolerance=base.kkt_tolerance,
            max_iterations=base.max_iterations,
            kernel_cache_bytes=base.kernel_cache_bytes,
            seed=seed + k,
        )
        models.append(smo_train(X, y, cost, kernel, cfg))
    return MulticlassModel(
        schema=train.schema,
        models=tuple(models),
        standardizer=standardizer,
        hyperparams=hp,
    )


def decision_vector(model: MulticlassModel, record: FeatureRecord) -> np.ndarray:
    """Per-class decision values for one record, in schema order."""
    if record.features.size != model.dim:
        raise DataError(
            f"record {record.id!r} has {record.features.size} features, model expects {model.dim}"
        )
    x = apply_standardizer(model.standardizer, concat_demographics(record))
    return np.array([m.decision_value(x) for m in model.models])


def predict(model: MulticlassModel, record: FeatureRecord) -> str:
    """Argmax class; ties resolve to the earliest schema position."""
    return model.schema[int(np.argmax(decision_vector(model, record)))]


def predict_batch(model: MulticlassModel, dataset: Dataset):
    """Element-wise predict; returns (id, predicted class, decision values)."""
    out = []
    for rec in dataset.records:
        try:
            values = decision_vector(model, rec)
        except (DataError, SvmError) as exc:
            raise DataError(f"prediction failed at record {rec.id!r}: {exc}") from exc
        out.append((rec.id, model.schema[int(np.argmax(values))], values))
    return out


# --- model bundle ----------------------------------------------------------

_BUNDLE_FORMAT = "ovr-svm-bundle"
_BUNDLE_VERSION = 1


def save_bundle(model: MulticlassModel, bundle_dir) -> None:
    """Directory with index.json plus one serialized binary model per class."""
    bundle_dir = Path(bundle_dir)
    bundle_dir.mkdir(parents=True, exist_ok=True)
    names = [f"class_{k}.svm" for k in range(len(model.schema))]
    index = {
        "format": _BUNDLE_FORMAT,
        "version": _BUNDLE_VERSION,
        "schema": list(model.schema),
        "hyperparams": {"C": model.hyperparams.C, "gamma": model.hyperparams.gamma},
        "standardizer": {
            "mean": model.standardizer.mean.tolist(),
            "scale": model.standardizer.scale.tolist(),
        },
        "models": names,
    }
    for name, binary in zip(names, model.models):
        save_model(binary, bundle_dir / name)
    _atomic_write_text(bundle_dir / "index.json", json.dumps(index, indent=2) + "\n")


def load_bundle(bundle_dir) -> MulticlassModel:
    bundle_dir = Path(bundle_dir)
    index_path = bundle_dir / "index.json"
    if not index_path.is_file():
        raise DataError(f"bundle index not found: {index_path}")
    index = json.loads(index_path.read_text(encoding="utf-8"))
    if index.get("format") != _BUNDLE_FORMAT or index.get("version") != _BUNDLE_VERSION:
        raise DataError(f"bundle {bundle_dir}: unsupported format/version")
    schema = tuple(index["schema"])
    models = tuple(load_model(bundle_dir / name) for name in index["models"])
    if len(models) != len(schema):
        raise DataError(f"bundle {bundle_dir}: {len(models)} models for {len(schema)} classes")
    standardizer = Standardizer(
        np.array(index["standardizer"]["mean"], dtype=float),
        np.array(index["standardizer"]["scale"], dtype=float),
    )
    hp = HyperParams(float(index["hyperparams"]["C"]), float(index["hyperparams"]["gamma"]))
    return MulticlassModel(schema=schema, models=models, standardizer=standardizer, hyperparams=hp)
