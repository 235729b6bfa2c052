"""Confusion counts and detection metrics.

Malicious activity is the positive class. Metrics whose denominator is
zero are undefined and reported as "n/a", never silently 0.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .errors import UndefinedMetricError


@dataclass(frozen=True)
class Confusion:
    tp: int
    fp: int
    tn: int
    fn: int

    def __post_init__(self) -> None:
        if min(self.tp, self.fp, self.tn, self.fn) < 0:
            raise ValueError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


def confusion(preds: Sequence[int], labels: Sequence[int]) -> Confusion:
    """Count (prediction, label) agreement; 1 = malicious."""
    if len(preds) != len(labels):
        raise ValueError(f"length mismatch: {len(preds)} preds, {len(labels)} labels")
    if len(preds) == 0:
        raise ValueError("cannot build a confusion matrix from no items")
    tp = fp = tn = fn = 0
    for p, l in zip(preds, labels):
        if p == 1 and l == 1:
            tp += 1
        elif p == 1 and l == 0:
            fp += 1
        elif p == 0 and l == 0:
            tn += 1
        else:
            fn += 1
    return Confusion(tp=tp, fp=fp, tn=tn, fn=fn)


def accuracy(c: Confusion) -> float:
    """(TP + TN) / (TP + TN + FP + FN)."""
    if c.total == 0:
        raise UndefinedMetricError("accuracy undefined with no items")
    return (c.tp + c.tn) / c.total


def precision(c: Confusion) -> float:
    """TP / (TP + FP)."""
    if c.tp + c.fp == 0:
        raise UndefinedMetricError("precision undefined with no predicted positives")
    return c.tp / (c.tp + c.fp)


def recall(c: Confusion) -> float:
    """TP / (TP + FN)."""
    if c.tp + c.fn == 0:
        raise UndefinedMetricError("recall undefined with no positive labels")
    return c.tp / (c.tp + c.fn)


def f1(p: float, r: float) -> float:
    """Harmonic mean 2PR / (P + R)."""
    if p + r == 0:
        raise UndefinedMetricError("f1 undefined when precision and recall are both 0")
    return 2.0 * p * r / (p + r)


@dataclass
class EvalReport:
    """Confusion counts plus the four metrics; None marks n/a."""

    model: str
    confusion: Confusion
    accuracy: float | None
    precision: float | None
    recall: float | None
    f1: float | None

    @classmethod
    def from_confusion(cls, model: str, c: Confusion) -> "EvalReport":
        def try_metric(fn, *args):
            try:
                return fn(*args)
            except UndefinedMetricError:
                return None

        acc = try_metric(accuracy, c)
        prec = try_metric(precision, c)
        rec = try_metric(recall, c)
        score = (
            try_metric(f1, prec, rec) if prec is not None and rec is not None else None
        )
        return cls(
            model=model, confusion=c, accuracy=acc, precision=prec, recall=rec, f1=score
        )

    @classmethod
    def from_predictions(
        cls, model: str, preds: Sequence[int], labels: Sequence[int]
    ) -> "EvalReport":
        return cls.from_confusion(model, confusion(preds, labels))

    def to_dict(self) -> dict:
        c = self.confusion
        return {
            "model": self.model,
            "tp": c.tp,
            "fp": c.fp,
            "tn": c.tn,
            "fn": c.fn,
            "accuracy": self.accuracy,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
        }


def percent(value: float | None) -> str:
    """Whole-number percentage, rounded half-up; None -> n/a."""
    if value is None:
        return "n/a"
    return f"{int(value * 100 + 0.5)}%"


REPORT_COLUMNS = ("Precision", "Recall", "Accuracy", "F1-Score")


def render_report(reports: Sequence[EvalReport]) -> str:
    """Plain-text comparison table, one row per model."""
    name_width = max([len("Model")] + [len(r.model) for r in reports])
    header = "Model".ljust(name_width) + "".join(
        f"{col:>12}" for col in REPORT_COLUMNS
    )
    lines = [header]
    for r in reports:
        cells = [percent(r.precision), percent(r.recall), percent(r.accuracy), percent(r.f1)]
        lines.append(r.model.ljust(name_width) + "".join(f"{c:>12}" for c in cells))
    return "\n".join(lines) + "\n"
