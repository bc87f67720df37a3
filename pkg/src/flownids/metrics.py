"""Multi-class evaluation: confusion matrix and one-vs-rest per-class
accuracy, precision, recall, and F1, with macro averages.

Every per-class figure treats that class as positive and the union of all
others as negative. Ratios with a zero denominator are reported as 0.0 and
flagged, so a class the model never predicts shows up as a flagged 0
precision instead of a crash or a silent NaN.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

import numpy as np

from .errors import DataError

METRIC_NAMES = ("accuracy", "precision", "recall", "f1")


@dataclass
class ConfusionMatrix:
    """counts[i, j] = rows whose true class is i and predicted class is j."""

    counts: np.ndarray
    class_names: Tuple[str, ...]

    def __post_init__(self):
        c = len(self.class_names)
        if self.counts.shape != (c, c):
            raise ValueError(
                f"counts shape {self.counts.shape} does not match {c} classes"
            )


@dataclass
class ClassMetrics:
    name: str
    tp: int
    fp: int
    fn: int
    tn: int
    accuracy: float
    precision: float
    recall: float
    f1: float
    # metric name -> True when its denominator was zero and 0.0 was reported
    undefined: Dict[str, bool]


@dataclass
class MetricsReport:
    per_class: List[ClassMetrics]
    macro_accuracy: float
    macro_precision: float
    macro_recall: float
    macro_f1: float
    overall_accuracy: float
    n_rows: int


def confusion(true_labels: np.ndarray, pred_labels: np.ndarray,
              classes) -> ConfusionMatrix:
    """Tally a confusion matrix.

    ``classes`` is either the class count or a sequence of class names.
    Labels outside [0, C) are a data error, not an index crash.
    """
    true_labels = np.asarray(true_labels, dtype=np.int64)
    pred_labels = np.asarray(pred_labels, dtype=np.int64)
    if true_labels.shape != pred_labels.shape or true_labels.ndim != 1:
        raise ValueError("true and predicted labels must be equal-length 1-D arrays")
    if isinstance(classes, (int, np.integer)):
        names = tuple(f"class_{i}" for i in range(int(classes)))
    else:
        names = tuple(str(n) for n in classes)
    c = len(names)
    if c == 0:
        raise ValueError("need at least one class")
    for which, arr in (("true", true_labels), ("predicted", pred_labels)):
        if arr.size and (arr.min() < 0 or arr.max() >= c):
            raise DataError(
                f"{which} labels outside [0, {c}): "
                f"min {arr.min()}, max {arr.max()}"
            )
    counts = np.zeros((c, c), dtype=np.int64)
    np.add.at(counts, (true_labels, pred_labels), 1)
    return ConfusionMatrix(counts=counts, class_names=names)


def _ratio(num: int, den: int) -> Tuple[float, bool]:
    if den == 0:
        return 0.0, True
    return num / den, False


def per_class_metrics(cm: ConfusionMatrix) -> MetricsReport:
    """One-vs-rest metrics for every class plus macro (unweighted) means."""
    counts = cm.counts
    total = int(counts.sum())
    per_class: List[ClassMetrics] = []
    for idx, name in enumerate(cm.class_names):
        tp = int(counts[idx, idx])
        fp = int(counts[:, idx].sum() - tp)
        fn = int(counts[idx, :].sum() - tp)
        tn = total - tp - fp - fn
        acc, acc_u = _ratio(tp + tn, total)
        ppv, ppv_u = _ratio(tp, tp + fp)
        tpr, tpr_u = _ratio(tp, tp + fn)
        # F1 from the definition 2*TP / (2*TP + FP + FN); equals the
        # harmonic mean of precision and recall whenever both exist.
        f1, f1_u = _ratio(2 * tp, 2 * tp + fp + fn)
        per_class.append(ClassMetrics(
            name=name, tp=tp, fp=fp, fn=fn, tn=tn,
            accuracy=acc, precision=ppv, recall=tpr, f1=f1,
            undefined={"accuracy": acc_u, "precision": ppv_u,
                       "recall": tpr_u, "f1": f1_u},
        ))
    overall, _ = _ratio(int(np.trace(counts)), total)
    return MetricsReport(
        per_class=per_class,
        macro_accuracy=float(np.mean([m.accuracy for m in per_class])),
        macro_precision=float(np.mean([m.precision for m in per_class])),
        macro_recall=float(np.mean([m.recall for m in per_class])),
        macro_f1=float(np.mean([m.f1 for m in per_class])),
        overall_accuracy=overall,
        n_rows=total,
    )


def f1_score(precision: float, recall: float) -> float:
    """Harmonic mean of precision and recall; 0 when both are 0."""
    if precision + recall == 0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def report_to_dict(report: MetricsReport) -> dict:
    return {
        "overall_accuracy": report.overall_accuracy,
        "macro": {
            "accuracy": report.macro_accuracy,
            "precision": report.macro_precision,
            "recall": report.macro_recall,
            "f1": report.macro_f1,
        },
        "per_class": {
            m.name: {
                "tp": m.tp, "fp": m.fp, "fn": m.fn, "tn": m.tn,
                "accuracy": m.accuracy,
                "precision": m.precision,
                "recall": m.recall,
                "f1": m.f1,
                "undefined": {k: v for k, v in m.undefined.items() if v},
            }
            for m in report.per_class
        },
        "n_rows": report.n_rows,
    }


def report_to_json(report: MetricsReport) -> str:
    """Deterministic JSON (sorted keys, fixed separators) for file diffs."""
    return json.dumps(report_to_dict(report), sort_keys=True, indent=2)


def confusion_to_csv(cm: ConfusionMatrix) -> str:
    """CSV with class names on both axes; rows are true classes."""
    lines = ["true\\pred," + ",".join(cm.class_names)]
    for idx, name in enumerate(cm.class_names):
        lines.append(name + "," + ",".join(str(int(v)) for v in cm.counts[idx]))
    return "\n".join(lines) + "\n"
