"""Command line: extract features from an image directory into a table."""

from __future__ import annotations

import argparse
import sys

from .backbone import FEATURE_DIM, ExtractorError
from .preprocess import PreprocessError
from .table import ExtractorConfig, build_feature_table


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="mriextract",
        description="Extract truncated-ResNet features and write a feature table.",
    )
    parser.add_argument("--images", required=True, help="directory of <id>.png/.jpg slices")
    parser.add_argument("--demographics", required=True, help="CSV with id,sex,age,label")
    parser.add_argument("--out", required=True, help="manifest path to write")
    parser.add_argument("--dim", type=int, default=FEATURE_DIM,
                        help=f"expected feature length (default {FEATURE_DIM})")
    parser.add_argument("--weights", choices=["pretrained", "seeded"], default="pretrained",
                        help="backbone weights: ImageNet checkpoint, or a seeded "
                             "random initialization for offline smoke runs")
    parser.add_argument("--seed", type=int, default=0, help="seed for --weights seeded")
    args = parser.parse_args(argv)

    cfg = ExtractorConfig(
        image_dir=args.images,
        demographics_csv=args.demographics,
        out_manifest=args.out,
        expected_dim=args.dim,
        weights=args.weights,
        seed=args.seed,
    )
    try:
        out = build_feature_table(cfg)
    except (ExtractorError, PreprocessError) as exc:
        print(f"mriextract: error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {out}")
    return 0


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
