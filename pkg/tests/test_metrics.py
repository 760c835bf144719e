import json

import numpy as np
import pytest

from mristage.metrics import (
    BinaryConfusion,
    ClassMetrics,
    ClassRow,
    MetricsError,
    MetricsReport,
    build_report,
    compute_metrics,
    format_percent,
    macro_average,
    mean_reports,
    per_class_confusions,
    render_report,
)

import _oracles


def test_confusions_hand_count():
    cms = per_class_confusions(["A", "A", "B", "B"], ["A", "B", "B", "B"], ["A", "B"])
    assert (cms["A"].tp, cms["A"].fn, cms["A"].fp, cms["A"].tn) == (1, 1, 0, 2)
    assert (cms["B"].tp, cms["B"].fn, cms["B"].fp, cms["B"].tn) == (2, 0, 1, 1)


def test_confusions_perfect_prediction():
    labels = ["A", "B", "C", "B", "A"]
    cms = per_class_confusions(labels, labels, ["A", "B", "C"])
    for cm in cms.values():
        assert cm.fp == 0 and cm.fn == 0


def test_confusions_counting_identities():
    rng = np.random.default_rng(2)
    schema = ["w", "x", "y", "z"]
    for _ in range(25):
        n = int(rng.integers(5, 60))
        y_true = [schema[i] for i in rng.integers(0, 4, n)]
        y_pred = [schema[i] for i in rng.integers(0, 4, n)]
        cms = per_class_confusions(y_true, y_pred, schema)
        correct = sum(1 for t, p in zip(y_true, y_pred) if t == p)
        assert sum(cm.tp for cm in cms.values()) == correct
        assert sum(cm.tp + cm.fn for cm in cms.values()) == n
        assert sum(cm.fp for cm in cms.values()) == n - correct
        assert sum(cm.fn for cm in cms.values()) == n - correct
        for cm in cms.values():
            assert cm.total == n


def test_confusions_validation():
    with pytest.raises(MetricsError, match="length"):
        per_class_confusions(["A"], ["A", "B"], ["A", "B"])
    with pytest.raises(MetricsError, match="unknown"):
        per_class_confusions(["A"], ["Q"], ["A", "B"])


def test_compute_metrics_hand_case():
    m = compute_metrics(BinaryConfusion(tp=90, fn=10, fp=20, tn=80))
    assert m.accuracy == pytest.approx(0.85)
    assert m.precision == pytest.approx(90 / 110)
    assert m.recall == pytest.approx(0.9)
    assert m.specificity == pytest.approx(0.8)
    assert m.f1 == pytest.approx(2 * (90 / 110) * 0.9 / ((90 / 110) + 0.9))


def test_compute_metrics_perfect():
    m = compute_metrics(BinaryConfusion(tp=7, fn=0, fp=0, tn=0))
    assert (m.accuracy, m.precision, m.recall, m.specificity, m.f1) == (1, 1, 1, 1, 1)


def test_compute_metrics_zero_over_zero_convention():
    # no positive predictions for a class that exists: the 0.00% rows
    m = compute_metrics(BinaryConfusion(tp=0, fn=4, fp=0, tn=96))
    assert m.precision == 0.0 and m.recall == 0.0 and m.f1 == 0.0
    assert m.specificity == 1.0 and m.accuracy == 0.96


def test_compute_metrics_empty():
    with pytest.raises(MetricsError):
        compute_metrics(BinaryConfusion(0, 0, 0, 0))


def test_metric_bounds_and_f1_betweenness():
    rng = np.random.default_rng(9)
    for _ in range(200):
        tp, fn, fp, tn = (int(v) for v in rng.integers(0, 30, 4))
        if tp + fn + fp + tn == 0:
            continue
        m = compute_metrics(BinaryConfusion(tp, fn, fp, tn))
        for v in (m.accuracy, m.precision, m.recall, m.specificity, m.f1):
            assert 0.0 <= v <= 1.0
        if m.precision + m.recall > 0:
            assert min(m.precision, m.recall) - 1e-12 <= m.f1 <= max(m.precision, m.recall) + 1e-12
        assert (m.f1 == 0.0) == (m.precision * m.recall == 0.0)


def test_metrics_match_brute_force_counter():
    rng = np.random.default_rng(31)
    schema = ["a", "b", "c", "d"]
    for _ in range(40):
        n = int(rng.integers(10, 80))
        y_true = [schema[i] for i in rng.integers(0, 4, n)]
        y_pred = [schema[i] for i in rng.integers(0, 4, n)]
        cms = per_class_confusions(y_true, y_pred, schema)
        for cls in schema:
            tp, fn, fp, tn = _oracles.brute_confusion(y_true, y_pred, cls)
            cm = cms[cls]
            assert (cm.tp, cm.fn, cm.fp, cm.tn) == (tp, fn, fp, tn)
            m = compute_metrics(cm)
            assert (m.accuracy, m.precision, m.recall, m.specificity, m.f1) == \
                _oracles.brute_rates(tp, fn, fp, tn)


def _metrics_with_accuracy(acc):
    return ClassMetrics(accuracy=acc, precision=0.0, recall=0.0, specificity=0.0, f1=0.0)


def test_macro_average_four_stage_table():
    rows = [_metrics_with_accuracy(a) for a in (0.8005, 0.7500, 0.9266, 0.9954)]
    avg = macro_average(rows)
    assert format_percent(avg.accuracy) == "86.81%"


def test_macro_average_three_stage_table():
    rows = [_metrics_with_accuracy(a) for a in (0.7836, 0.7150, 0.8605)]
    avg = macro_average(rows)
    assert format_percent(avg.accuracy) == "78.64%"


def test_macro_average_single_row():
    row = ClassMetrics(0.5, 0.4, 0.3, 0.2, 0.1)
    assert macro_average([row]) == row


def test_macro_average_empty():
    with pytest.raises(MetricsError):
        macro_average([])


def test_format_percent_half_up():
    assert format_percent(0.868125) == "86.81%"
    assert format_percent(0.86815) == "86.82%"
    assert format_percent(1.0) == "100.00%"
    assert format_percent(0.0) == "0.00%"


def test_render_perfect_report():
    labels = ["A", "B", "A", "B"]
    report = build_report(labels, labels, ["A", "B"])
    table = render_report(report, "table")
    assert table.count("100.00%") == 15  # 3 rows x 5 metric columns
    assert "Average" in table


def test_render_json_consistent_with_table():
    y_true = ["A", "A", "B", "B", "B", "A"]
    y_pred = ["A", "B", "B", "A", "B", "A"]
    report = build_report(y_true, y_pred, ["A", "B"])
    doc = json.loads(render_report(report, "json"))
    assert doc["n"] == 6
    for row, cls_doc in zip(report.rows, doc["classes"]):
        assert cls_doc["name"] == row.name
        assert cls_doc["metrics"]["recall"] == row.metrics.recall
        rendered = format_percent(cls_doc["metrics"]["recall"])
        assert rendered == format_percent(row.metrics.recall)


def test_render_average_cell_from_table_rows():
    rows = tuple(
        ClassRow(f"c{i}", BinaryConfusion(1, 0, 0, 0), _metrics_with_accuracy(a))
        for i, a in enumerate((0.8005, 0.7500, 0.9266, 0.9954))
    )
    report = MetricsReport(rows=rows, average=macro_average([r.metrics for r in rows]), n=4)
    table = render_report(report, "table")
    average_line = [ln for ln in table.splitlines() if ln.startswith("Average")][0]
    assert "86.81%" in average_line


def test_mean_reports_average_of_counts_and_metrics():
    r1 = build_report(["A", "B"], ["A", "B"], ["A", "B"])
    r2 = build_report(["A", "B"], ["B", "B"], ["A", "B"])
    merged = mean_reports([r1, r2])
    assert merged.rows[0].confusion.tp == pytest.approx(0.5)
    assert merged.rows[0].metrics.recall == pytest.approx(0.5)
    assert merged.average.recall == pytest.approx(
        (r1.average.recall + r2.average.recall) / 2
    )
    assert merged.n == 2
