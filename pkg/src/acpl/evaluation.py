"""ROC-AUC, sensitivity, F1, pseudo-label accuracy and class histograms."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata

from .data import MULTICLASS
from .errors import ShapeError, UndefinedMetricError

MULTILABEL_THRESHOLD = 0.5


def roc_auc(scores, labels) -> float:
    """Mann-Whitney AUC with midranks for ties."""
    s = np.asarray(scores, dtype=np.float64).ravel()
    y = np.asarray(labels).ravel().astype(bool)
    if s.shape != y.shape:
        raise ShapeError("scores and labels differ in length")
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("AUC needs both positive and negative labels")
    r = rankdata(s)
    u = r[y].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def harden(probs, task_kind):
    p = np.atleast_2d(np.asarray(probs, dtype=np.float64))
    if task_kind == MULTICLASS:
        out = np.zeros_like(p)
        out[np.arange(p.shape[0]), p.argmax(axis=1)] = 1.0
        return out
    return (p >= MULTILABEL_THRESHOLD).astype(np.float64)


def f1_sensitivity(predictions, truth):
    """Per-class ``(f1, sensitivity)`` arrays from hard 0/1 label matrices.

    A zero denominator gives 0 for that metric.
    """
    pred = np.atleast_2d(np.asarray(predictions, dtype=np.float64)) > 0.5
    true = np.atleast_2d(np.asarray(truth, dtype=np.float64)) > 0.5
    if pred.shape != true.shape:
        raise ShapeError(f"predictions {pred.shape} and truth {true.shape} differ")
    tp = (pred & true).sum(axis=0).astype(np.float64)
    fp = (pred & ~true).sum(axis=0).astype(np.float64)
    fn = (~pred & true).sum(axis=0).astype(np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        sens = np.where(tp + fn > 0, tp / (tp + fn), 0.0)
        f1 = np.where(2 * tp + fp + fn > 0, 2 * tp / (2 * tp + fp + fn), 0.0)
    return f1, sens


def class_distribution(truth) -> np.ndarray:
    """Percentage of samples whose label includes each class."""
    y = np.atleast_2d(np.asarray(truth, dtype=np.float64))
    if y.shape[0] == 0:
        raise ValueError("class distribution of an empty set")
    return 100.0 * (y > 0.5).sum(axis=0) / y.shape[0]


def pseudo_label_accuracy(pseudo, truth, task_kind):
    """Fraction of rows whose hardened pseudo-label equals the truth exactly."""
    p = harden(pseudo, task_kind)
    t = np.atleast_2d(np.asarray(truth, dtype=np.float64))
    if p.shape[0] == 0:
        return None
    return float(np.all(p == t, axis=1).mean())


@dataclass
class MetricReport:
    auc: list
    sensitivity: list
    f1: list
    macro_auc: float | None
    macro_sensitivity: float
    macro_f1: float
    undefined_auc_classes: list = field(default_factory=list)

    def to_dict(self):
        return {
            "macro_auc": self.macro_auc,
            "macro_f1": self.macro_f1,
            "macro_sensitivity": self.macro_sensitivity,
            "per_class_auc": self.auc,
            "per_class_f1": self.f1,
            "per_class_sensitivity": self.sensitivity,
            "undefined_auc_classes": self.undefined_auc_classes,
        }

    def per_class_rows(self):
        return [{"class": c, "auc": self.auc[c], "f1": self.f1[c],
                 "sensitivity": self.sensitivity[c]} for c in range(len(self.f1))]


def evaluate(probs, truth, task_kind) -> MetricReport:
    """Per-class and macro metrics. Classes whose AUC is undefined (absent
    or universal in ``truth``) are left out of the macro AUC."""
    p = np.atleast_2d(np.asarray(probs, dtype=np.float64))
    t = np.atleast_2d(np.asarray(truth, dtype=np.float64))
    aucs, undefined = [], []
    for c in range(t.shape[1]):
        try:
            aucs.append(roc_auc(p[:, c], t[:, c] > 0.5))
        except UndefinedMetricError:
            aucs.append(None)
            undefined.append(c)
    f1, sens = f1_sensitivity(harden(p, task_kind), t)
    defined = [a for a in aucs if a is not None]
    return MetricReport(
        auc=aucs,
        sensitivity=sens.tolist(),
        f1=f1.tolist(),
        macro_auc=float(np.mean(defined)) if defined else None,
        macro_sensitivity=float(sens.mean()),
        macro_f1=float(f1.mean()),
        undefined_auc_classes=undefined,
    )


def evaluate_learner(learner, dataset) -> MetricReport:
    """Score the learner's (EMA-free) predictions on a labelled dataset."""
    return evaluate(learner.predict(dataset.features), dataset.labels, dataset.task_kind)
