"""Per-class confusion counts, the five derived rates, and report tables.

Every class is scored one-vs-rest: a prediction counts as that class's
true positive, false negative, false positive, or true negative. Rates
with an empty denominator are reported as 0, which is how unpredicted
minority classes end up with 0.00% rows.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, fields
from decimal import Decimal, ROUND_HALF_UP


class MetricsError(ValueError):
    """Invalid prediction vectors or empty report input."""


@dataclass(frozen=True)
class BinaryConfusion:
    tp: float
    fn: float
    fp: float
    tn: float

    @property
    def total(self) -> float:
        return self.tp + self.fn + self.fp + self.tn


@dataclass(frozen=True)
class ClassMetrics:
    accuracy: float
    precision: float
    recall: float
    specificity: float
    f1: float


@dataclass(frozen=True)
class ClassRow:
    name: str
    confusion: BinaryConfusion
    metrics: ClassMetrics


@dataclass(frozen=True)
class MetricsReport:
    """Per-class rows in schema order plus the unweighted average row."""

    rows: tuple[ClassRow, ...]
    average: ClassMetrics
    n: float


def per_class_confusions(y_true, y_pred, schema) -> dict[str, BinaryConfusion]:
    """One-vs-rest confusion counts for every schema class."""
    y_true = list(y_true)
    y_pred = list(y_pred)
    if len(y_true) != len(y_pred):
        raise MetricsError(f"length mismatch: {len(y_true)} true vs {len(y_pred)} predicted")
    known = set(schema)
    for lab in y_true:
        if lab not in known:
            raise MetricsError(f"unknown true label {lab!r}")
    for lab in y_pred:
        if lab not in known:
            raise MetricsError(f"unknown predicted label {lab!r}")
    n = len(y_true)
    out = {}
    for cls in schema:
        tp = sum(1 for t, p in zip(y_true, y_pred) if t == cls and p == cls)
        fn = sum(1 for t, p in zip(y_true, y_pred) if t == cls and p != cls)
        fp = sum(1 for t, p in zip(y_true, y_pred) if t != cls and p == cls)
        out[cls] = BinaryConfusion(tp=tp, fn=fn, fp=fp, tn=n - tp - fn - fp)
    return out


def _ratio(num: float, den: float) -> float:
    return num / den if den > 0 else 0.0


def compute_metrics(cm: BinaryConfusion) -> ClassMetrics:
    """Accuracy, precision, recall, specificity, F1 from one confusion.

    Precision, recall, and F1 report 0 when their denominator is 0 (a
    class nobody predicted). Specificity with no negatives at all is
    vacuously 1.
    """
    total = cm.total
    if total <= 0:
        raise MetricsError("empty confusion matrix")
    precision = _ratio(cm.tp, cm.tp + cm.fp)
    recall = _ratio(cm.tp, cm.tp + cm.fn)
    return ClassMetrics(
        accuracy=(cm.tp + cm.tn) / total,
        precision=precision,
        recall=recall,
        specificity=cm.tn / (cm.tn + cm.fp) if cm.tn + cm.fp > 0 else 1.0,
        f1=_ratio(2.0 * precision * recall, precision + recall),
    )


def macro_average(rows) -> ClassMetrics:
    """Field-wise arithmetic mean of per-class metric rows."""
    rows = list(rows)
    if not rows:
        raise MetricsError("cannot average an empty list of class metrics")
    k = len(rows)
    return ClassMetrics(
        **{
            f.name: sum(getattr(r, f.name) for r in rows) / k
            for f in fields(ClassMetrics)
        }
    )


def build_report(y_true, y_pred, schema) -> MetricsReport:
    """Full per-class report from pooled predictions."""
    confusions = per_class_confusions(y_true, y_pred, schema)
    rows = tuple(
        ClassRow(cls, confusions[cls], compute_metrics(confusions[cls]))
        for cls in schema
    )
    return MetricsReport(rows=rows, average=macro_average([r.metrics for r in rows]),
                         n=float(len(list(y_true))))


def mean_reports(reports) -> MetricsReport:
    """Field-wise mean of several reports over the same schema.

    Confusion counts are averaged too, so they may be fractional.
    """
    reports = list(reports)
    if not reports:
        raise MetricsError("cannot average an empty list of reports")
    schema = [row.name for row in reports[0].rows]
    for rep in reports:
        if [row.name for row in rep.rows] != schema:
            raise MetricsError("reports disagree on class schema")
    k = len(reports)
    rows = []
    for idx, cls in enumerate(schema):
        cms = [rep.rows[idx].confusion for rep in reports]
        cm = BinaryConfusion(
            tp=sum(c.tp for c in cms) / k,
            fn=sum(c.fn for c in cms) / k,
            fp=sum(c.fp for c in cms) / k,
            tn=sum(c.tn for c in cms) / k,
        )
        rows.append(ClassRow(cls, cm, macro_average([rep.rows[idx].metrics for rep in reports])))
    return MetricsReport(
        rows=tuple(rows),
        average=macro_average([rep.average for rep in reports]),
        n=sum(rep.n for rep in reports) / k,
    )


def format_percent(fraction: float) -> str:
    """Percent with 2 decimals, halves rounded up: 0.868125 -> '86.81%'."""
    value = Decimal(repr(float(fraction))) * 100
    return f"{value.quantize(Decimal('0.01'), rounding=ROUND_HALF_UP)}%"


_COLUMNS = ("Accuracy", "Precision", "Recall", "Specificity", "F1")


def _metric_cells(m: ClassMetrics) -> list[str]:
    return [
        format_percent(m.accuracy),
        format_percent(m.precision),
        format_percent(m.recall),
        format_percent(m.specificity),
        format_percent(m.f1),
    ]


def _number(x: float):
    return int(x) if float(x).is_integer() else float(x)


def report_to_dict(report: MetricsReport) -> dict:
    """Machine form with full-precision fractions."""
    return {
        "classes": [
            {
                "name": row.name,
                "confusion": {
                    "tp": _number(row.confusion.tp),
                    "fn": _number(row.confusion.fn),
                    "fp": _number(row.confusion.fp),
                    "tn": _number(row.confusion.tn),
                },
                "metrics": {
                    "accuracy": row.metrics.accuracy,
                    "precision": row.metrics.precision,
                    "recall": row.metrics.recall,
                    "specificity": row.metrics.specificity,
                    "f1": row.metrics.f1,
                },
            }
            for row in report.rows
        ],
        "average": {
            "accuracy": report.average.accuracy,
            "precision": report.average.precision,
            "recall": report.average.recall,
            "specificity": report.average.specificity,
            "f1": report.average.f1,
        },
        "n": _number(report.n),
    }


def render_report(report: MetricsReport, format: str = "table") -> str:
    """Aligned percent table (like the result tables) or the JSON form."""
    if format == "json":
        return json.dumps(report_to_dict(report), indent=2) + "\n"
    if format != "table":
        raise MetricsError(f"unknown report format {format!r}")
    body = [[row.name, *_metric_cells(row.metrics)] for row in report.rows]
    body.append(["Average", *_metric_cells(report.average)])
    header = ["Class", *_COLUMNS]
    widths = [
        max(len(header[c]), *(len(line[c]) for line in body))
        for c in range(len(header))
    ]
    def fmt(cells):
        return " | ".join(
            cells[0].ljust(widths[0]) if c == 0 else cells[c].rjust(widths[c])
            for c in range(len(cells))
        ).rstrip()
    lines = [fmt(header)]
    lines.append("-+-".join("-" * w for w in widths))
    lines.extend(fmt(line) for line in body)
    return "\n".join(lines) + "\n"
