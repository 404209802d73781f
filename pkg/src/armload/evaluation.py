"""Confusion matrix and per-class / aggregate classification metrics.

Note the row/column convention used here, which is the transpose of the
usual one for precision and recall: with rows = true class,

    P_i = cm[i, i] / (sum of row i)
    R_i = cm[i, i] / (sum of column i)

A_i counts the diagonal cell plus every cell outside row i and column i.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from decimal import ROUND_DOWN, Decimal

import numpy as np

from .errors import InvalidInputError

REPORT_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class ConfusionMatrix:
    counts: np.ndarray  # counts[i, j]: true class i predicted as class j
    alphabet: tuple

    def __post_init__(self):
        c = np.asarray(self.counts, dtype=np.int64)
        k = len(self.alphabet)
        if c.shape != (k, k):
            raise InvalidInputError(f"confusion matrix shape {c.shape} != ({k}, {k})")
        if (c < 0).any():
            raise InvalidInputError("confusion counts must be non-negative")
        object.__setattr__(self, "counts", c)
        object.__setattr__(self, "alphabet", tuple(str(a) for a in self.alphabet))

    @property
    def total(self) -> int:
        return int(self.counts.sum())


@dataclass(frozen=True)
class ClassMetrics:
    label: str
    accuracy: float
    precision: float
    recall: float
    f_measure: float
    precision_undefined: bool = False
    recall_undefined: bool = False


@dataclass(frozen=True)
class Aggregate:
    accuracy: float
    precision: float
    recall: float
    f_measure: float
    overall_accuracy: float


def confusion(true_labels, predicted_labels, alphabet) -> ConfusionMatrix:
    true_labels, predicted_labels = list(true_labels), list(predicted_labels)
    if len(true_labels) != len(predicted_labels):
        raise InvalidInputError(
            f"{len(true_labels)} true labels but {len(predicted_labels)} predictions")
    alphabet = tuple(str(a) for a in alphabet)
    index = {a: i for i, a in enumerate(alphabet)}
    cm = np.zeros((len(alphabet), len(alphabet)), dtype=np.int64)
    for t, p in zip(true_labels, predicted_labels):
        t, p = str(t), str(p)
        if t not in index or p not in index:
            raise InvalidInputError(f"label {t if t not in index else p!r} not in alphabet {alphabet}")
        cm[index[t], index[p]] += 1
    return ConfusionMatrix(cm, alphabet)


def _require_total(cm: ConfusionMatrix) -> int:
    total = cm.total
    if total == 0:
        raise InvalidInputError("confusion matrix is empty")
    return total


def per_class_metrics(cm: ConfusionMatrix) -> list:
    """(A, P, R, FM) per class. Zero denominators give 0 and set the matching flag."""
    total = _require_total(cm)
    c = cm.counts
    rows, cols = c.sum(axis=1), c.sum(axis=0)
    out = []
    for i, label in enumerate(cm.alphabet):
        tp = c[i, i]
        rest = total - rows[i] - cols[i] + tp  # cells in neither row i nor column i
        p = tp / rows[i] if rows[i] else 0.0
        r = tp / cols[i] if cols[i] else 0.0
        fm = 2 * p * r / (p + r) if p + r > 0 else 0.0
        out.append(ClassMetrics(label, float((tp + rest) / total), float(p), float(r), float(fm),
                                precision_undefined=not rows[i], recall_undefined=not cols[i]))
    return out


def aggregate(cm: ConfusionMatrix) -> Aggregate:
    """Unweighted class means of A, P, R, FM plus overall accuracy (trace / total)."""
    total = _require_total(cm)
    per = per_class_metrics(cm)
    mean = lambda attr: float(np.mean([getattr(m, attr) for m in per]))
    return Aggregate(mean("accuracy"), mean("precision"), mean("recall"), mean("f_measure"),
                     float(np.trace(cm.counts) / total))


def truncate_percent(value: float) -> str:
    """Fraction in [0, 1] as a percentage truncated (not rounded) to 2 decimals: 0.8888 -> '88.88'."""
    d = Decimal(repr(float(value))) * 100
    return str(d.quantize(Decimal("0.01"), rounding=ROUND_DOWN))


def report_dict(cm: ConfusionMatrix, config: dict | None = None) -> dict:
    per = per_class_metrics(cm)
    agg = aggregate(cm)
    return {
        "schema_version": REPORT_SCHEMA_VERSION,
        "config": dict(config or {}),
        "alphabet": list(cm.alphabet),
        "confusion_matrix": cm.counts.tolist(),
        "total": cm.total,
        "per_class": [{
            "label": m.label, "accuracy": m.accuracy, "precision": m.precision,
            "recall": m.recall, "f_measure": m.f_measure,
            "precision_undefined": m.precision_undefined,
            "recall_undefined": m.recall_undefined,
        } for m in per],
        "aggregate": {
            "overall_accuracy": agg.overall_accuracy, "accuracy": agg.accuracy,
            "precision": agg.precision, "recall": agg.recall, "f_measure": agg.f_measure,
        },
    }


def canonical_json(doc: dict) -> str:
    """Sorted keys, fixed indentation, trailing newline; no timestamps are ever added."""
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def report_json(cm: ConfusionMatrix, config: dict | None = None) -> str:
    return canonical_json(report_dict(cm, config))


def _table(header, rows):
    widths = [max(len(str(r[i])) for r in [header] + rows) for i in range(len(header))]
    fmt = lambda r: " | ".join(str(v).rjust(w) for v, w in zip(r, widths))
    sep = "-+-".join("-" * w for w in widths)
    return "\n".join([fmt(header), sep] + [fmt(r) for r in rows])


def report_table(cm: ConfusionMatrix, name: str = "") -> str:
    """Plain-text aggregate and per-class tables, percentages truncated to 2 decimals."""
    agg = aggregate(cm)
    pct = lambda v: truncate_percent(v) + "%"
    top = _table(["Exp.", "OvA", "A^", "P^", "R^", "FM^"],
                 [[name or "-", pct(agg.overall_accuracy), pct(agg.accuracy), pct(agg.precision),
                   pct(agg.recall), pct(agg.f_measure)]])
    rows = []
    for m in per_class_metrics(cm):
        flag = ("*" if m.precision_undefined else "") + ("+" if m.recall_undefined else "")
        rows.append([name or "-", m.label + flag, pct(m.accuracy), pct(m.precision),
                     pct(m.recall), pct(m.f_measure)])
    per = _table(["Features", "Class", "A", "P", "R", "FM"], rows)
    return top + "\n\n" + per + "\n"
