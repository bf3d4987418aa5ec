"""Confusion-matrix rates, ROC curves and AUC. Attack is the positive class."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .dataset import ATTACK, CLASSES, NORMAL
from .errors import DataError, UndefinedMetricError


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    tn: int
    fp: int
    fn: int

    def __post_init__(self):
        for name in ("tp", "tn", "fp", "fn"):
            if getattr(self, name) < 0:
                raise DataError(f"{name} must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn


def _check_binary(labels, what):
    bad = {lab for lab in labels if lab not in CLASSES}
    if bad:
        raise DataError(f"{what} labels must be Normal/Attack, found {sorted(map(str, bad))}")


def confusion(predicted: Sequence[str], truth: Sequence[str]) -> ConfusionMatrix:
    predicted, truth = list(predicted), list(truth)
    if len(predicted) != len(truth):
        raise DataError(f"{len(predicted)} predictions for {len(truth)} labels")
    if not truth:
        raise DataError("cannot build a confusion matrix from no rows")
    _check_binary(predicted, "predicted")
    _check_binary(truth, "true")
    tp = tn = fp = fn = 0
    for p, t in zip(predicted, truth):
        if t == ATTACK:
            tp += p == ATTACK
            fn += p == NORMAL
        else:
            tn += p == NORMAL
            fp += p == ATTACK
    return ConfusionMatrix(tp, tn, fp, fn)


def accuracy(cm: ConfusionMatrix) -> float:
    if cm.total == 0:
        raise UndefinedMetricError("accuracy undefined: no rows")
    return (cm.tp + cm.tn) / cm.total


def detection_rate(cm: ConfusionMatrix) -> float:
    if cm.tp + cm.fn == 0:
        raise UndefinedMetricError("detection rate undefined: no attack rows (TP+FN=0)")
    return cm.tp / (cm.tp + cm.fn)


def false_positive_rate(cm: ConfusionMatrix) -> float:
    if cm.fp + cm.tn == 0:
        raise UndefinedMetricError("false positive rate undefined: no normal rows (FP+TN=0)")
    return cm.fp / (cm.fp + cm.tn)


@dataclass(frozen=True)
class RocCurve:
    thresholds: tuple[float, ...]
    fpr: tuple[float, ...]
    tpr: tuple[float, ...]
    auc: float

    @property
    def points(self) -> list[tuple[float, float]]:
        return list(zip(self.fpr, self.tpr))


def roc_curve(scores, truth) -> RocCurve:
    """Sweep a threshold down through the distinct scores.

    A row is flagged Attack when its score is >= the threshold, so tied
    scores move together in one step. The curve is anchored at (0, 0) with an
    infinite threshold and always ends at (1, 1). AUC is the trapezoidal area,
    accumulated in integer counts before the final division.
    """
    scores = np.asarray(scores, dtype=np.float64)
    truth = list(truth)
    if scores.shape != (len(truth),):
        raise DataError(f"{scores.shape[0]} scores for {len(truth)} labels")
    _check_binary(truth, "true")
    positive = np.array([t == ATTACK for t in truth], dtype=bool)
    n_pos = int(positive.sum())
    n_neg = len(truth) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("ROC needs both Attack and Normal rows")

    order = np.argsort(-scores, kind="stable")
    s_sorted, p_sorted = scores[order], positive[order]
    # last index of each run of equal scores
    ends = np.flatnonzero(np.append(s_sorted[1:] != s_sorted[:-1], True))
    tps = np.cumsum(p_sorted)[ends]
    fps = (ends + 1) - tps
    thresholds = [math.inf] + s_sorted[ends].tolist()
    tp_counts = [0] + tps.tolist()
    fp_counts = [0] + fps.tolist()

    area2 = 0  # twice the area scaled by n_pos * n_neg
    for i in range(1, len(tp_counts)):
        area2 += (fp_counts[i] - fp_counts[i - 1]) * (tp_counts[i] + tp_counts[i - 1])
    auc = area2 / (2 * n_pos * n_neg)
    return RocCurve(
        tuple(thresholds),
        tuple(f / n_neg for f in fp_counts),
        tuple(t / n_pos for t in tp_counts),
        auc,
    )


def write_roc(curve: RocCurve, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["threshold", "fpr", "tpr"])
        for t, f, p in zip(curve.thresholds, curve.fpr, curve.tpr):
            writer.writerow([repr(t) if math.isfinite(t) else "inf", repr(f), repr(p)])


@dataclass(frozen=True)
class EvaluationReport:
    confusion: ConfusionMatrix
    accuracy: float
    detection_rate: float
    fpr: float
    disclosure: float
    feature_percentage: float
    auc: float
    n_features: int

    @classmethod
    def from_confusion(cls, cm: ConfusionMatrix, disclosure: float, feature_percentage: float,
                       auc: float, n_features: int) -> "EvaluationReport":
        return cls(cm, accuracy(cm), detection_rate(cm), false_positive_rate(cm),
                   disclosure, feature_percentage, auc, n_features)

    def check_consistency(self) -> None:
        """Raise if a printed rate does not recompute from the printed counts."""
        cm = self.confusion
        expected = (accuracy(cm), detection_rate(cm), false_positive_rate(cm))
        if (self.accuracy, self.detection_rate, self.fpr) != expected:
            raise DataError("report rates disagree with its confusion matrix")

    def as_dict(self) -> dict:
        out = asdict(self)
        out["confusion"] = asdict(self.confusion)
        return out

    def to_text(self) -> str:
        self.check_consistency()
        cm = self.confusion
        pairs = [
            ("source", "local"),
            ("feature_percentage", repr(float(self.feature_percentage))),
            ("n_features", str(self.n_features)),
            ("disclosure", repr(self.disclosure)),
            ("TP", str(cm.tp)), ("TN", str(cm.tn)), ("FP", str(cm.fp)), ("FN", str(cm.fn)),
            ("accuracy", repr(self.accuracy)),
            ("detection_rate", repr(self.detection_rate)),
            ("false_positive_rate", repr(self.fpr)),
            ("auc", repr(self.auc)),
        ]
        return "".join(f"{k} = {v}\n" for k, v in pairs)

    def to_json(self) -> str:
        self.check_consistency()
        doc = {"source": "local", **self.as_dict()}
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def parse_report_text(text: str) -> dict:
    out = {}
    for line in text.splitlines():
        if "=" in line:
            key, _, value = line.partition("=")
            out[key.strip()] = value.strip()
    return out
