"""Command line entry point: ingest, train, evaluate, learning-curve, predict.

All randomness flows from --seed, so repeating an invocation reproduces
its output files byte for byte; only run.log carries timestamps. Exit
codes: 0 success, 1 usage, 2 data/validation, 3 runtime.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import time
from pathlib import Path

from .data import (
    DataError,
    Dataset,
    _atomic_write_text,
    load_csv_dataset,
    load_dataset,
    write_dataset,
)
from .harness import (
    SearchSpace,
    curve_csv,
    default_curve_fractions,
    random_search,
    run_learning_curve,
    run_loo,
    run_repeated_holdout,
)
from .metrics import render_report
from .multiclass import HyperParams, load_bundle, predict_batch, save_bundle, train_multiclass
from .svm import SvmError, TrainConfig

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_RUNTIME = 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="mristage", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add_shared(p):
        p.add_argument("--manifest", help="feature-table manifest path")
        p.add_argument("--config", help="JSON config file; flags win over it")
        p.add_argument("--seed", type=int, help="master seed (default 0)")
        p.add_argument("--out", help="output directory")
        p.add_argument("--jobs", type=int, help="parallel workers (default 1)")

    p_ingest = sub.add_parser("ingest", help="convert a CSV table to the binary feature-table format")
    add_shared(p_ingest)
    p_ingest.add_argument("--csv", help="input CSV: id,label,sex,age,f0..")
    p_ingest.add_argument("--out-manifest", help="manifest path to write")

    p_train = sub.add_parser("train", help="fit a model bundle on the whole table")
    add_shared(p_train)

    p_eval = sub.add_parser("evaluate", help="run an evaluation protocol")
    add_shared(p_eval)
    p_eval.add_argument("--protocol", choices=["loo", "holdout"])
    p_eval.add_argument("--repetitions", type=int, help="hold-out repetitions (default 50)")
    p_eval.add_argument("--train-fraction", type=float, help="hold-out training share (default 0.8)")

    p_curve = sub.add_parser("learning-curve", help="accuracy vs training-set size")
    add_shared(p_curve)
    p_curve.add_argument("--fractions", help="start:stop:step, e.g. 0.1:0.7:0.1")

    p_pred = sub.add_parser("predict", help="apply a model bundle to a feature table")
    add_shared(p_pred)
    p_pred.add_argument("--bundle", help="model bundle directory")

    return parser


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    p = Path(path)
    if not p.is_file():
        raise DataError(f"config file not found: {p}")
    try:
        cfg = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"config {p}: invalid JSON ({exc})") from exc
    if not isinstance(cfg, dict):
        raise DataError(f"config {p}: top level must be an object")
    return cfg


def _setting(args, cfg: dict, flag: str, key: str, default):
    value = getattr(args, flag, None)
    if value is not None:
        return value
    if key in cfg:
        return cfg[key]
    return default


def _search_space(cfg: dict) -> SearchSpace:
    raw = cfg.get("search", {})
    if not isinstance(raw, dict):
        raise DataError("config key 'search' must be an object")
    kwargs = {}
    if "c_range" in raw:
        kwargs["c_range"] = tuple(float(v) for v in raw["c_range"])
    if "gamma_range" in raw:
        kwargs["gamma_range"] = tuple(float(v) for v in raw["gamma_range"])
    if "budget" in raw:
        kwargs["budget"] = int(raw["budget"])
    if "patience" in raw:
        kwargs["patience"] = int(raw["patience"])
    return SearchSpace(**kwargs)


def _train_config(cfg: dict) -> TrainConfig | None:
    raw = cfg.get("solver")
    if raw is None:
        return None
    if not isinstance(raw, dict):
        raise DataError("config key 'solver' must be an object")
    kwargs = {}
    if "kkt_tolerance" in raw:
        kwargs["kkt_tolerance"] = float(raw["kkt_tolerance"])
    if "max_iterations" in raw:
        kwargs["max_iterations"] = int(raw["max_iterations"])
    if "kernel_cache_bytes" in raw:
        kwargs["kernel_cache_bytes"] = int(raw["kernel_cache_bytes"])
    return TrainConfig(**kwargs)


def _apply_schema_override(dataset: Dataset, cfg: dict) -> Dataset:
    override = cfg.get("schema")
    if override is None:
        return dataset
    override = tuple(str(c) for c in override)
    if sorted(override) != sorted(dataset.schema):
        raise DataError(
            f"schema override {list(override)} is not a permutation of {list(dataset.schema)}"
        )
    return Dataset(dataset.records, dataset.dim, override, dataset.provenance)


def _load_table(args, cfg: dict) -> Dataset:
    manifest = _setting(args, cfg, "manifest", "manifest", None)
    if not manifest:
        raise _UsageError("--manifest is required")
    return _apply_schema_override(load_dataset(manifest), cfg)


def _out_dir(args, cfg: dict) -> Path:
    out = _setting(args, cfg, "out", "out", None)
    if not out:
        raise _UsageError("--out is required")
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write_run_log(out: Path, argv: list[str]) -> None:
    stamp = time.strftime("%Y-%m-%dT%H:%M:%S%z")
    _atomic_write_text(out / "run.log", f"{stamp} mristage {' '.join(argv)}\n")


def _parse_fractions(spec: str) -> list[float]:
    parts = spec.split(":")
    if len(parts) != 3:
        raise _UsageError(f"--fractions expects start:stop:step, got {spec!r}")
    try:
        start, stop, step = (float(v) for v in parts)
    except ValueError:
        raise _UsageError(f"--fractions expects numbers, got {spec!r}") from None
    if step <= 0 or stop < start:
        raise _UsageError(f"--fractions range is empty: {spec!r}")
    count = int((stop - start) / step + 0.5) + 1
    return [round(start + k * step, 10) for k in range(count)]


def _cmd_ingest(args, cfg: dict, argv: list[str]) -> int:
    csv_path = _setting(args, cfg, "csv", "csv", None)
    out_manifest = _setting(args, cfg, "out_manifest", "out_manifest", None)
    if not csv_path or not out_manifest:
        raise _UsageError("ingest requires --csv and --out-manifest")
    schema = cfg.get("schema")
    dataset = load_csv_dataset(csv_path, schema=tuple(schema) if schema else None)
    write_dataset(dataset, out_manifest)
    print(f"wrote {out_manifest} ({len(dataset)} records, d={dataset.dim})")
    return EXIT_OK


def _cmd_train(args, cfg: dict, argv: list[str]) -> int:
    dataset = _load_table(args, cfg)
    out = _out_dir(args, cfg)
    seed = int(_setting(args, cfg, "seed", "seed", 0))
    solver = _train_config(cfg)
    raw_hp = cfg.get("hyperparams")
    if raw_hp:
        hp = HyperParams(float(raw_hp["C"]), float(raw_hp["gamma"]))
    else:
        space = _search_space(cfg)
        hp, _ = random_search(dataset, space, seed, solver)
    model = train_multiclass(dataset, hp, seed=seed, config=solver)
    save_bundle(model, out)
    _write_run_log(out, argv)
    print(f"wrote bundle {out} (C={hp.C:g}, gamma={hp.gamma:g})")
    return EXIT_OK


def _cmd_evaluate(args, cfg: dict, argv: list[str]) -> int:
    dataset = _load_table(args, cfg)
    out = _out_dir(args, cfg)
    seed = int(_setting(args, cfg, "seed", "seed", 0))
    jobs = int(_setting(args, cfg, "jobs", "jobs", 1))
    protocol = _setting(args, cfg, "protocol", "protocol", None)
    if protocol not in ("loo", "holdout"):
        raise _UsageError("evaluate requires --protocol loo|holdout")
    space = _search_space(cfg)
    solver = _train_config(cfg)
    if protocol == "loo":
        report = run_loo(dataset, space, seed, jobs=jobs, config=solver)
    else:
        repetitions = int(_setting(args, cfg, "repetitions", "repetitions", 50))
        train_fraction = float(_setting(args, cfg, "train_fraction", "train_fraction", 0.8))
        report = run_repeated_holdout(
            dataset, repetitions, train_fraction, space, seed, jobs=jobs, config=solver
        )
    formats = cfg.get("formats", ["json", "table"])
    if "json" in formats:
        _atomic_write_text(out / "report.json", report.to_json())
    if "table" in formats:
        _atomic_write_text(out / "report.txt", render_report(report.metrics, "table"))
    _write_run_log(out, argv)
    print(f"wrote {out / 'report.json'}")
    return EXIT_OK


def _cmd_learning_curve(args, cfg: dict, argv: list[str]) -> int:
    dataset = _load_table(args, cfg)
    out = _out_dir(args, cfg)
    seed = int(_setting(args, cfg, "seed", "seed", 0))
    jobs = int(_setting(args, cfg, "jobs", "jobs", 1))
    raw = _setting(args, cfg, "fractions", "fractions", None)
    if raw is None:
        fractions = default_curve_fractions()
    elif isinstance(raw, str):
        fractions = _parse_fractions(raw)
    else:
        fractions = [float(v) for v in raw]
    space = _search_space(cfg)
    solver = _train_config(cfg)
    report = run_learning_curve(dataset, fractions, space, seed, jobs=jobs, config=solver)
    _atomic_write_text(out / "report.json", report.to_json())
    _atomic_write_text(out / "curve.csv", curve_csv(report.curve))
    _write_run_log(out, argv)
    print(f"wrote {out / 'curve.csv'}")
    return EXIT_OK


def _cmd_predict(args, cfg: dict, argv: list[str]) -> int:
    bundle_dir = _setting(args, cfg, "bundle", "bundle", None)
    if not bundle_dir:
        raise _UsageError("predict requires --bundle")
    model = load_bundle(bundle_dir)
    dataset = _load_table(args, cfg)
    if dataset.dim != model.dim:
        raise DataError(
            f"dimension mismatch: table d={dataset.dim}, bundle expects d={model.dim}"
        )
    rows = predict_batch(model, dataset)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["id", "predicted_label", *(f"decision_{cls}" for cls in model.schema)])
    for rid, predicted, values in rows:
        writer.writerow([rid, predicted, *(repr(float(v)) for v in values)])
    sys.stdout.write(buf.getvalue())
    return EXIT_OK


_COMMANDS = {
    "ingest": _cmd_ingest,
    "train": _cmd_train,
    "evaluate": _cmd_evaluate,
    "learning-curve": _cmd_learning_curve,
    "predict": _cmd_predict,
}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        cfg = _load_config(getattr(args, "config", None))
        return _COMMANDS[args.command](args, cfg, argv)
    except _UsageError as exc:
        print(f"mristage: error: usage: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, SvmError) as exc:
        print(f"mristage: error: data: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (RuntimeError, OSError) as exc:
        print(f"mristage: error: runtime: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
