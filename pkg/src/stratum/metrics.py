"""Classification metrics on 1-based label vectors."""

from __future__ import annotations

import numpy as np

from .errors import ValidationError


def _pair(truth, predicted) -> tuple[np.ndarray, np.ndarray]:
    t = np.asarray(truth).ravel()
    p = np.asarray(predicted).ravel()
    if t.shape != p.shape:
        raise ValidationError(f"length mismatch: {t.size} truth vs {p.size} predicted labels")
    if t.size == 0:
        raise ValidationError("metrics need at least one label")
    return t, p


def accuracy(truth, predicted) -> float:
    t, p = _pair(truth, predicted)
    return float(np.count_nonzero(t == p)) / t.size


def f1_macro(truth, predicted) -> float:
    """Unweighted mean of per-class F1 over the classes present in ``truth``.

    A class with P + R = 0 contributes 0.
    """
    t, p = _pair(truth, predicted)
    scores = []
    for c in np.unique(t):
        tp = np.count_nonzero((p == c) & (t == c))
        n_pred = np.count_nonzero(p == c)
        n_true = np.count_nonzero(t == c)
        precision = tp / n_pred if n_pred else 0.0
        recall = tp / n_true
        scores.append(0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall))
    return float(np.mean(scores))


def confusion_matrix(truth, predicted, classes=None) -> tuple[np.ndarray, list[int]]:
    """Counts with rows = true class, columns = predicted class."""
    t, p = _pair(truth, predicted)
    if classes is None:
        classes = np.union1d(t, p)
    classes = [int(c) for c in classes]
    index = {c: i for i, c in enumerate(classes)}
    if any(int(v) not in index for v in np.concatenate([t, p])):
        raise ValidationError("labels outside the declared class list")
    M = np.zeros((len(classes), len(classes)), dtype=np.int64)
    np.add.at(M, ([index[int(v)] for v in t], [index[int(v)] for v in p]), 1)
    return M, classes
