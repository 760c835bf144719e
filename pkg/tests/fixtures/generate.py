#!/usr/bin/env python3
"""Regenerate the committed synthetic feature tables.

Run from the repository root: python tests/fixtures/generate.py
The outputs are committed; tests load them from disk and never call this.
"""

from pathlib import Path

import numpy as np

from mristage.data import Dataset, FeatureRecord, write_dataset

HERE = Path(__file__).parent


def _records(rng, prefix, start, count, center, sigma, label, age_range):
    recs = []
    pts = rng.normal(center, sigma, (count, len(center)))
    for k in range(count):
        i = start + k
        recs.append(
            FeatureRecord(
                id=f"{prefix}{i:03d}",
                features=np.asarray(pts[k], dtype="<f4"),
                sex="F" if i % 2 else "M",
                age=float(np.round(rng.uniform(*age_range), 1)),
                label=label,
            )
        )
    return recs


def gauss3() -> Dataset:
    """Three well-separated 2-D clusters, 20 records each."""
    rng = np.random.default_rng(20240601)
    centers = {"stage0": (0.0, 9.0), "stage1": (8.0, -5.0), "stage2": (-8.0, -5.0)}
    recs = []
    for ci, (label, center) in enumerate(centers.items()):
        recs.extend(_records(rng, "g", ci * 20, 20, center, 0.4, label, (55, 95)))
    return Dataset(tuple(recs), 2, tuple(centers), "synthetic 3-cluster fixture")


def imb9to1() -> Dataset:
    """Overlapping binary clusters at a 9:1 class ratio (180 vs 20)."""
    rng = np.random.default_rng(20240602)
    recs = _records(rng, "i", 0, 180, (0.0, 0.0), 1.0, "common", (55, 95))
    recs += _records(rng, "i", 180, 20, (2.0, 0.0), 1.0, "rare", (55, 95))
    return Dataset(tuple(recs), 2, ("common", "rare"), "synthetic 9:1 imbalance fixture")


def oasis_shape() -> Dataset:
    """Class counts 316/70/28/2 over 4-D clusters, mimicking the strongly
    imbalanced four-stage table (the published per-class counts sum to 416
    even though the collection is described with 436 images)."""
    rng = np.random.default_rng(20240603)
    spec = [
        ("CognitivelyNormal", 316, (0.0, 0.0, 0.0, 0.0)),
        ("VeryMildDementia", 70, (2.5, 0.0, 0.0, 0.0)),
        ("MildDementia", 28, (0.0, 2.5, 0.0, 0.0)),
        ("ModerateAD", 2, (0.0, 0.0, 2.5, 0.0)),
    ]
    recs = []
    start = 0
    for label, count, center in spec:
        recs.extend(_records(rng, "o", start, count, center, 1.2, label, (18, 98)))
        start += count
    return Dataset(
        tuple(recs), 4,
        tuple(label for label, _, _ in spec),
        "synthetic four-stage imbalance fixture",
    )


def main() -> None:
    for name, build in (("gauss3", gauss3), ("imb9to1", imb9to1), ("oasis_shape", oasis_shape)):
        out = HERE / name
        out.mkdir(parents=True, exist_ok=True)
        dataset = build()
        write_dataset(dataset, out / "manifest.json", features_file=f"{name}.f32")
        print(f"wrote {out}/manifest.json ({len(dataset)} records, d={dataset.dim})")


if __name__ == "__main__":
    main()
