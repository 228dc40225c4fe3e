"""Classification metrics and the stratified train/test split."""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from ..errors import ParameterError


@dataclass
class EvalMetrics:
    """Metrics from a confusion matrix (rows: true class, columns: predicted).

    Recall and f1 are None for classes absent from the truth; balanced accuracy
    averages recall over the present classes only.
    """

    classes: list
    confusion: np.ndarray
    balanced_accuracy: float
    precision: dict
    recall: dict
    f1: dict
    support: dict

    def to_dict(self) -> dict:
        key = str
        return {
            "classes": [key(c) for c in self.classes],
            "confusion_matrix": self.confusion.tolist(),
            "balanced_accuracy": self.balanced_accuracy,
            "precision": {key(c): v for c, v in self.precision.items()},
            "recall": {key(c): v for c, v in self.recall.items()},
            "f1": {key(c): v for c, v in self.f1.items()},
            "support": {key(c): v for c, v in self.support.items()},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def metrics_from_confusion(confusion, classes=None) -> EvalMetrics:
    cm = np.asarray(confusion, dtype=np.int64)
    if cm.ndim != 2 or cm.shape[0] != cm.shape[1] or (cm < 0).any():
        raise ParameterError("confusion matrix must be square with non-negative counts")
    if cm.sum() == 0:
        raise ParameterError("empty confusion matrix")
    classes = list(range(len(cm))) if classes is None else list(classes)
    support = cm.sum(axis=1)
    predicted = cm.sum(axis=0)
    precision, recall, f1, sup = {}, {}, {}, {}
    for i, c in enumerate(classes):
        tp = int(cm[i, i])
        sup[c] = int(support[i])
        precision[c] = float(Fraction(tp, int(predicted[i]))) if predicted[i] else 0.0
        if support[i] == 0:
            recall[c] = f1[c] = None
            continue
        recall[c] = float(Fraction(tp, int(support[i])))
        denom = int(support[i]) + int(predicted[i])
        f1[c] = float(Fraction(2 * tp, denom))
    present = [Fraction(int(cm[i, i]), int(support[i])) for i in range(len(cm)) if support[i]]
    ba = float(sum(present) / len(present))
    return EvalMetrics(classes, cm, ba, precision, recall, f1, sup)


def confusion_matrix(y_true, y_pred, classes) -> np.ndarray:
    index = {c: i for i, c in enumerate(classes)}
    cm = np.zeros((len(classes), len(classes)), dtype=np.int64)
    for t, p in zip(np.asarray(y_true).tolist(), np.asarray(y_pred).tolist()):
        cm[index[t], index[p]] += 1
    return cm


def evaluate(model, X_test, y_test) -> EvalMetrics:
    y_test = np.asarray(y_test)
    if len(y_test) == 0:
        raise ParameterError("empty test set")
    pred = model.predict(X_test)
    classes = sorted(set(model.classes) | set(y_test.tolist()))
    return metrics_from_confusion(confusion_matrix(y_test, pred, classes), classes)


def split_dataset(rows, labels, train_frac: float = 0.8, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Stratified split returning sorted (train, test) row-index arrays.

    Each label contributes round-half-up(n * train_frac) rows to train. A label
    with a single row always goes to train.
    """
    labels = np.asarray(labels)
    if len(labels) != len(rows):
        raise ParameterError("rows and labels differ in length")
    if not 0 < train_frac < 1:
        raise ParameterError("train_frac must lie in (0, 1)")
    frac = Fraction(str(train_frac))
    rng = np.random.default_rng(seed)
    train, test = [], []
    for label in sorted(set(labels.tolist()), key=str):
        idx = np.flatnonzero(labels == label)
        if len(idx) == 1:
            warnings.warn(f"label {label!r} has a single row; assigned to train", stacklevel=2)
            train.extend(idx.tolist())
            continue
        n_train = math.floor(len(idx) * frac + Fraction(1, 2))
        perm = rng.permutation(idx)
        train.extend(perm[:n_train].tolist())
        test.extend(perm[n_train:].tolist())
    return np.array(sorted(train), dtype=np.int64), np.array(sorted(test), dtype=np.int64)
