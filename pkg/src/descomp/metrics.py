"""Confusion matrices and the eight macro/micro classification criteria.

Criteria: false discovery rate (1 - precision), false negative rate
(1 - recall), F1 and the Matthews correlation coefficient, each in a
macro-averaged (unweighted per-class mean, minority-sensitive) and a
micro-averaged (pooled counts, majority-sensitive) flavour.

Everything is also exposed as a loss (lower is better) so rank directions
stay uniform downstream: FDR and FNR are losses already, F1 becomes 1 - F1
and MCC becomes (1 - MCC) / 2.

Conventions for degenerate folds: a class never predicted gets precision 0
(FDR 1); classes absent from the evaluated data are excluded from macro
averages (recorded in ``excluded_classes``); 0/0 ratios inside F1 and MCC
resolve to 0. Macro MCC is the mean of per-class one-vs-rest binary MCCs;
micro MCC is the multiclass correlation computed from the full matrix.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

CRITERIA = ("MaFDR", "MaFNR", "MaF1", "MaMCC", "MiFDR", "MiFNR", "MiF1", "MiMCC")


def confusion(labels_true, labels_pred, n_classes: int) -> np.ndarray:
    """(M, M) count matrix with entry [true, predicted]."""
    t = np.asarray(labels_true, dtype=int)
    p = np.asarray(labels_pred, dtype=int)
    if t.shape != p.shape or t.ndim != 1:
        raise ValueError("label vectors must be 1-D and of equal length")
    if t.size == 0:
        raise ValueError("empty label vectors")
    cm = np.zeros((n_classes, n_classes), dtype=int)
    np.add.at(cm, (t, p), 1)
    return cm


@dataclass(frozen=True)
class CriterionReport:
    losses: dict[str, float]
    raw: dict[str, float]
    excluded_classes: tuple[int, ...]  # absent from the data, left out of macros


def _binary_mcc(tp, fp, fn, tn) -> float:
    denom = np.sqrt(float(tp + fp) * (tp + fn) * (tn + fp) * (tn + fn))
    if denom == 0.0:
        return 0.0
    return (float(tp) * tn - float(fp) * fn) / denom


def _multiclass_mcc(cm: np.ndarray) -> float:
    total = float(cm.sum())
    correct = float(np.trace(cm))
    true_counts = cm.sum(axis=1).astype(float)
    pred_counts = cm.sum(axis=0).astype(float)
    cov = correct * total - float(pred_counts @ true_counts)
    denom = np.sqrt((total ** 2 - float(pred_counts @ pred_counts))
                    * (total ** 2 - float(true_counts @ true_counts)))
    if denom == 0.0:
        return 0.0
    return cov / denom


def macro_micro_criteria(cm: np.ndarray) -> CriterionReport:
    cm = np.asarray(cm)
    total = int(cm.sum())
    if total <= 0:
        raise ValueError("confusion matrix holds no observations")
    n_classes = cm.shape[0]
    tp = np.diag(cm).astype(float)
    true_counts = cm.sum(axis=1).astype(float)
    pred_counts = cm.sum(axis=0).astype(float)
    present = np.flatnonzero(true_counts > 0)
    excluded = tuple(int(c) for c in np.flatnonzero(true_counts == 0))

    precision = np.zeros(n_classes)
    nonzero_pred = pred_counts > 0
    precision[nonzero_pred] = tp[nonzero_pred] / pred_counts[nonzero_pred]
    recall = np.zeros(n_classes)
    recall[present] = tp[present] / true_counts[present]
    pr_sum = precision + recall
    f1 = np.zeros(n_classes)
    ok = pr_sum > 0
    f1[ok] = 2 * precision[ok] * recall[ok] / pr_sum[ok]
    mcc_per_class = np.array([
        _binary_mcc(tp[c],
                    pred_counts[c] - tp[c],
                    true_counts[c] - tp[c],
                    total - pred_counts[c] - true_counts[c] + tp[c])
        for c in range(n_classes)])

    macro_precision = float(precision[present].mean())
    macro_recall = float(recall[present].mean())
    macro_f1 = float(f1[present].mean())
    macro_mcc = float(mcc_per_class[present].mean())

    accuracy = float(tp.sum()) / total  # pooled one-vs-rest precision = recall = F1
    micro_mcc = _multiclass_mcc(cm)

    raw = {
        "MaFDR": 1.0 - macro_precision,
        "MaFNR": 1.0 - macro_recall,
        "MaF1": macro_f1,
        "MaMCC": macro_mcc,
        "MiFDR": 1.0 - accuracy,
        "MiFNR": 1.0 - accuracy,
        "MiF1": accuracy,
        "MiMCC": micro_mcc,
    }
    losses = {
        "MaFDR": raw["MaFDR"],
        "MaFNR": raw["MaFNR"],
        "MaF1": 1.0 - raw["MaF1"],
        "MaMCC": (1.0 - raw["MaMCC"]) / 2.0,
        "MiFDR": raw["MiFDR"],
        "MiFNR": raw["MiFNR"],
        "MiF1": 1.0 - raw["MiF1"],
        "MiMCC": (1.0 - raw["MiMCC"]) / 2.0,
    }
    return CriterionReport(losses=losses, raw=raw, excluded_classes=excluded)
