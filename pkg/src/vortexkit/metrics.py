"""Confusion matrices, precision/recall/accuracy and section timing."""
from __future__ import annotations

import csv
import time
from contextlib import contextmanager
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import ValidationError


@dataclass(frozen=True, eq=False)
class Confusion:
    """Counts with rows = true class, columns = predicted class."""

    counts: np.ndarray

    @property
    def n_classes(self) -> int:
        return self.counts.shape[0]

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def to_list(self):
        return self.counts.tolist()


def confusion(true, pred, n_classes: int) -> Confusion:
    true = np.asarray(true, dtype=np.int64)
    pred = np.asarray(pred, dtype=np.int64)
    if true.shape != pred.shape:
        raise ValidationError("true and predicted label arrays differ in shape")
    for name, arr in (("true", true), ("predicted", pred)):
        if arr.size and (arr.min() < 0 or arr.max() >= n_classes):
            raise ValidationError(f"{name} labels outside [0, {n_classes})")
    flat = np.bincount(true * n_classes + pred, minlength=n_classes * n_classes)
    return Confusion(flat.reshape(n_classes, n_classes))


class Scores(NamedTuple):
    precision: float
    recall: float
    accuracy: float
    precision_undefined: bool
    recall_undefined: bool


def precision_recall(conf: Confusion, positive: int = 1) -> Scores:
    """One-vs-rest scores for class ``positive``; a zero denominator gives 0 and sets its flag."""
    c = conf.counts
    tp = int(c[positive, positive])
    fp = int(c[:, positive].sum()) - tp
    fn = int(c[positive, :].sum()) - tp
    total = conf.total
    p_den, r_den = tp + fp, tp + fn
    return Scores(
        precision=tp / p_den if p_den else 0.0,
        recall=tp / r_den if r_den else 0.0,
        accuracy=float(np.trace(c)) / total if total else 0.0,
        precision_undefined=p_den == 0,
        recall_undefined=r_den == 0,
    )


def summary(conf: Confusion) -> dict:
    """Accuracy plus precision/recall: class 1 for binary, macro average otherwise."""
    if conf.n_classes == 2:
        s = precision_recall(conf, 1)
        return {"accuracy": s.accuracy, "precision": s.precision, "recall": s.recall}
    per = [precision_recall(conf, m) for m in range(conf.n_classes)]
    return {
        "accuracy": per[0].accuracy if per else 0.0,
        "precision": float(np.mean([s.precision for s in per])),
        "recall": float(np.mean([s.recall for s in per])),
    }


def write_confusion_csv(conf: Confusion, path) -> None:
    """Header ``pred_0..pred_{M-1}``, then row ``m`` holds the counts for true class ``m``."""
    M = conf.n_classes
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"pred_{m}" for m in range(M)])
        for m in range(M):
            w.writerow([str(int(v)) for v in conf.counts[m]])


class Stopwatch:
    """Accumulates wall-clock seconds per named section; nested names join with '/'."""

    def __init__(self):
        self.sections: dict[str, float] = {}
        self._stack: list[str] = []

    @contextmanager
    def section(self, name: str):
        full = "/".join(self._stack + [name])
        self._stack.append(name)
        start = time.perf_counter()
        try:
            yield
        finally:
            elapsed = time.perf_counter() - start
            self._stack.pop()
            self.sections[full] = self.sections.get(full, 0.0) + elapsed

    def __getitem__(self, name):
        return self.sections[name]

    def as_dict(self) -> dict[str, float]:
        return dict(self.sections)


def stopwatch(name: str, watch: Stopwatch | None = None):
    """Shorthand: ``with stopwatch("train", sw): ...``."""
    return (watch or Stopwatch()).section(name)
