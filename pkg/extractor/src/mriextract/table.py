"""Join extracted features with demographics and write feature tables.

The on-disk format matches the classification pipeline's contract: a JSON
manifest next to a raw row-major little-endian float32 payload of exactly
4*n*d bytes. This module implements the format directly; the consumer
package is never imported.
"""

from __future__ import annotations

import csv
import json
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .backbone import FEATURE_DIM, ExtractorError, extract_batch, load_backbone
from .preprocess import preprocess

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg")
BATCH_SIZE = 8


@dataclass(frozen=True)
class ExtractorConfig:
    image_dir: Path
    demographics_csv: Path
    out_manifest: Path
    expected_dim: int = FEATURE_DIM
    weights: str = "pretrained"
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "image_dir", Path(self.image_dir))
        object.__setattr__(self, "demographics_csv", Path(self.demographics_csv))
        object.__setattr__(self, "out_manifest", Path(self.out_manifest))
        if self.expected_dim < 1:
            raise ExtractorError(f"expected_dim must be >= 1, got {self.expected_dim}")


def read_demographics(csv_path) -> list[dict]:
    """Rows of the id,sex,age,label table, in file order."""
    path = Path(csv_path)
    if not path.is_file():
        raise ExtractorError(f"demographics csv not found: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        required = {"id", "sex", "age", "label"}
        if reader.fieldnames is None or not required <= set(reader.fieldnames):
            raise ExtractorError(f"{path}: header must contain id,sex,age,label")
        rows = []
        seen = set()
        for lineno, row in enumerate(reader, start=2):
            rid = row["id"]
            if rid in seen:
                raise ExtractorError(f"{path}:{lineno}: duplicate id {rid!r}")
            seen.add(rid)
            if row["sex"] not in ("F", "M"):
                raise ExtractorError(f"{path}:{lineno}: sex must be F or M for id {rid!r}")
            try:
                age = float(row["age"])
            except ValueError:
                raise ExtractorError(f"{path}:{lineno}: bad age for id {rid!r}") from None
            rows.append({"id": rid, "sex": row["sex"], "age": age, "label": row["label"]})
    if not rows:
        raise ExtractorError(f"{path}: no demographic rows")
    return rows


def _find_images(image_dir: Path) -> dict[str, Path]:
    if not image_dir.is_dir():
        raise ExtractorError(f"image directory not found: {image_dir}")
    found: dict[str, Path] = {}
    for entry in sorted(image_dir.iterdir()):
        if entry.suffix.lower() in IMAGE_SUFFIXES:
            if entry.stem in found:
                raise ExtractorError(f"multiple image files for id {entry.stem!r}")
            found[entry.stem] = entry
    return found


def _atomic_write(path: Path, data: bytes) -> None:
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


def build_feature_table(cfg: ExtractorConfig) -> Path:
    """Extract every image named in the demographics table and write the
    manifest + payload pair. Output row order follows the CSV order."""
    rows = read_demographics(cfg.demographics_csv)
    images = _find_images(cfg.image_dir)

    row_ids = {r["id"] for r in rows}
    missing_images = sorted(row_ids - images.keys())
    if missing_images:
        raise ExtractorError(f"no image file for id {missing_images[0]!r}")
    missing_rows = sorted(images.keys() - row_ids)
    if missing_rows:
        raise ExtractorError(f"no demographics row for image id {missing_rows[0]!r}")

    backbone = load_backbone(cfg.weights, cfg.seed)
    features = np.empty((len(rows), cfg.expected_dim), dtype="<f4")
    for start in range(0, len(rows), BATCH_SIZE):
        chunk = rows[start:start + BATCH_SIZE]
        batch = np.stack([preprocess(images[r["id"]]) for r in chunk])
        features[start:start + len(chunk)] = extract_batch(backbone, batch, cfg.expected_dim)

    schema: list[str] = []
    for r in rows:
        if r["label"] not in schema:
            schema.append(r["label"])

    features_file = cfg.out_manifest.stem + ".f32"
    manifest = {
        "version": 1,
        "n": len(rows),
        "d": cfg.expected_dim,
        "dtype": "f32",
        "byte_order": "little",
        "layout": "row-major",
        "features_file": features_file,
        "schema": schema,
        "records": [
            {"id": r["id"], "label": r["label"], "sex": r["sex"], "age": r["age"]}
            for r in rows
        ],
    }
    _atomic_write(cfg.out_manifest.parent / features_file, features.tobytes(order="C"))
    _atomic_write(cfg.out_manifest, (json.dumps(manifest, indent=2) + "\n").encode("utf-8"))
    return cfg.out_manifest
