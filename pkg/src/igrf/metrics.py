"""One-vs-all multiclass evaluation.

Count-derived rates are computed with :class:`fractions.Fraction` and rounded
to float once, so accuracy, per-class rates and support-weighted averages are
exact functions of the confusion counts.  0/0 is defined as 0.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class ConfusionMatrix:
    """Rows are true classes, columns predicted classes."""

    counts: np.ndarray

    @property
    def k(self) -> int:
        return self.counts.shape[0]

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def one_vs_all(self, c: int) -> tuple[int, int, int, int]:
        """(TP, FN, FP, TN) for class ``c``."""
        tp = int(self.counts[c, c])
        fn = int(self.counts[c, :].sum()) - tp
        fp = int(self.counts[:, c].sum()) - tp
        tn = self.total - tp - fn - fp
        return tp, fn, fp, tn

    def support(self, c: int) -> int:
        return int(self.counts[c, :].sum())


def confusion(true_labels, predicted_labels, k: int) -> ConfusionMatrix:
    t = np.asarray(true_labels, dtype=np.int64)
    p = np.asarray(predicted_labels, dtype=np.int64)
    if t.shape != p.shape:
        raise ValueError(f"length mismatch: {t.shape} vs {p.shape}")
    if t.size and (min(t.min(), p.min()) < 0 or max(t.max(), p.max()) >= k):
        raise ValueError(f"labels must lie in [0, {k})")
    counts = np.zeros((k, k), dtype=np.int64)
    np.add.at(counts, (t, p), 1)
    return ConfusionMatrix(counts)


def _div(a, b) -> Fraction:
    return Fraction(a, b) if b else Fraction(0)


def _rates_exact(cm: ConfusionMatrix, c: int) -> dict[str, Fraction]:
    tp, fn, fp, tn = cm.one_vs_all(c)
    precision = _div(tp, tp + fp)
    recall = _div(tp, tp + fn)
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else Fraction(0)
    return {"precision": precision, "recall": recall, "fpr": _div(fp, tn + fp), "f1": f1}


def rates(cm: ConfusionMatrix, c: int) -> dict[str, float]:
    """Precision, recall (TPR), FPR and F1 of class ``c`` against the rest."""
    if not 0 <= c < cm.k:
        raise IndexError(f"class index {c} out of range")
    return {k: float(v) for k, v in _rates_exact(cm, c).items()}


def accuracy(cm: ConfusionMatrix) -> float:
    return float(_div(int(np.trace(cm.counts)), cm.total))


def roc_curve(scores, truth):
    """ROC points over descending distinct thresholds, (0,0) to (1,1).

    Returns ``(fpr, tpr, fp_counts, tp_counts)``; tied scores form one step.
    """
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(truth).astype(bool)
    if s.shape != y.shape:
        raise ValueError("scores and truth differ in length")
    pos = int(y.sum())
    neg = y.size - pos
    if pos == 0 or neg == 0:
        raise ValueError("ROC needs at least one positive and one negative sample")
    order = np.argsort(-s, kind="stable")
    s, y = s[order], y[order]
    last = np.r_[np.flatnonzero(s[1:] != s[:-1]), s.size - 1]
    tp = np.r_[0, np.cumsum(y)[last]]
    fp = np.r_[0, np.cumsum(~y)[last]]
    return fp / neg, tp / pos, fp, tp


def roc_auc(scores, truth):
    """(points, auc) with the trapezoid rule evaluated on exact counts."""
    fpr, tpr, fp, tp = roc_curve(scores, truth)
    pos, neg = int(tp[-1]), int(fp[-1])
    twice_area = sum(int(fp[i + 1] - fp[i]) * int(tp[i + 1] + tp[i]) for i in range(len(fp) - 1))
    auc = float(Fraction(twice_area, 2 * pos * neg))
    return list(zip(fpr.tolist(), tpr.tolist())), auc


@dataclass
class EvalReport:
    class_names: list
    per_class: dict
    accuracy: float
    weighted: dict
    support: dict
    confusion: list
    roc: dict = field(default_factory=dict)
    auc: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "class_names": self.class_names,
            "per_class": self.per_class,
            "weighted_avg": self.weighted,
            "accuracy": self.accuracy,
            "support": self.support,
            "confusion": self.confusion,
            "auc": self.auc,
        }

    def write_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n", encoding="utf-8")

    def write_confusion_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["true\\predicted", *self.class_names])
            for name, row in zip(self.class_names, self.confusion):
                w.writerow([name, *row])

    def write_roc_csvs(self, directory) -> list[Path]:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        paths = []
        for name, pts in self.roc.items():
            path = directory / f"roc_{name}.csv"
            with open(path, "w", newline="", encoding="utf-8") as fh:
                w = csv.writer(fh)
                w.writerow(["fpr", "tpr"])
                w.writerows(pts)
            paths.append(path)
        return paths

    def table(self) -> str:
        """Plain-text table: one row per class plus the weighted average."""
        head = f"{'':<16}{'Precision':>10}{'Recall':>10}{'F1':>10}{'FPR':>10}"
        lines = [head]
        for name in self.class_names:
            r = self.per_class[name]
            lines.append(f"{name:<16}{r['precision']:>10.4f}{r['recall']:>10.4f}"
                         f"{r['f1']:>10.4f}{r['fpr']:>10.4f}")
        w = self.weighted
        lines.append(f"{'Weighted Avg.':<16}{w['precision']:>10.4f}{w['recall']:>10.4f}"
                     f"{w['f1']:>10.4f}{w['fpr']:>10.4f}")
        lines.append(f"accuracy {self.accuracy:.4%}")
        return "\n".join(lines)


def weighted_report(cm: ConfusionMatrix, probabilities=None, truth=None,
                    class_names: Sequence[str] | None = None) -> EvalReport:
    """Per-class rates, support-weighted averages, accuracy and per-class ROC.

    ROC/AUC are computed only when ``probabilities`` and ``truth`` are given,
    and skipped for classes with no positives or no negatives.
    """
    k = cm.k
    names = list(class_names) if class_names is not None else [str(i) for i in range(k)]
    total = cm.total
    per_class, weighted = {}, {m: Fraction(0) for m in ("precision", "recall", "f1", "fpr")}
    for c in range(k):
        exact = _rates_exact(cm, c)
        per_class[names[c]] = {m: float(v) for m, v in exact.items()}
        for m, v in exact.items():
            weighted[m] += cm.support(c) * v
    weighted = {m: float(v / total) if total else 0.0 for m, v in weighted.items()}
    acc = float(_div(int(np.trace(cm.counts)), total)) if k > 1 else 1.0
    report = EvalReport(names, per_class, acc, weighted,
                        {names[c]: cm.support(c) for c in range(k)}, cm.counts.tolist())
    if probabilities is not None and truth is not None:
        P = np.asarray(probabilities, dtype=np.float64)
        t = np.asarray(truth, dtype=np.int64)
        if P.shape != (t.size, k):
            raise ValueError(f"probabilities must have shape ({t.size}, {k})")
        for c in range(k):
            positives = t == c
            if positives.all() or not positives.any():
                continue
            pts, auc = roc_auc(P[:, c], positives)
            report.roc[names[c]] = pts
            report.auc[names[c]] = auc
    return report


def evaluate(truth, probabilities, class_names: Sequence[str] | None = None) -> EvalReport:
    """Arg-max predictions from ``probabilities`` scored against ``truth``."""
    P = np.asarray(probabilities, dtype=np.float64)
    pred = np.argmax(P, axis=1)
    cm = confusion(truth, pred, P.shape[1])
    return weighted_report(cm, P, truth, class_names)
