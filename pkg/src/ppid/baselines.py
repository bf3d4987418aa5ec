"""Nearest-neighbour and Gaussian Naive Bayes comparison classifiers.

Both operate on standardized selected-feature rows and are fully
deterministic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dataset import ATTACK
from .errors import ConfigError, DataError

# Published reference figures as (technique, DR %, FPR %); reported as
# quoted values, never recomputed locally.
QUOTED_COMPARISON = (
    ("Nearest Neighbour", 55.3, 44.8),
    ("Naive Bayes", 44.4, 52.6),
    ("Random Forests", 60.5, 38.4),
    ("EM mixture (published)", 88.9, 11.7),
)


@dataclass(frozen=True, eq=False)
class KnnModel:
    X: np.ndarray
    labels: tuple
    k: int = 1

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.X, dtype=np.float64))
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "labels", tuple(self.labels))
        if X.shape[0] != len(self.labels):
            raise DataError(f"{X.shape[0]} training rows but {len(self.labels)} labels")
        if self.k < 1 or self.k % 2 == 0:
            raise ConfigError(f"k must be a positive odd integer, got {self.k}")
        if self.k > X.shape[0]:
            raise ConfigError(f"k={self.k} exceeds the {X.shape[0]} training rows")


def knn_fit(X, labels, k: int = 1) -> KnnModel:
    return KnnModel(X, labels, k)


def _vote(labels):
    counts = {}
    for lab in labels:
        counts[lab] = counts.get(lab, 0) + 1
    best = max(counts.values())
    # first label (in neighbour order) reaching the top count wins
    return next(lab for lab in labels if counts[lab] == best)


def knn_classify(model: KnnModel, row):
    """Majority label of the k nearest training rows (Euclidean).

    Equal distances are resolved in favour of the lower training index.
    """
    row = np.asarray(row, dtype=np.float64)
    if row.shape != (model.X.shape[1],):
        raise DataError(f"query has shape {row.shape}, training rows have {model.X.shape[1]} features")
    dist = ((model.X - row) ** 2).sum(axis=1)
    nearest = np.argsort(dist, kind="stable")[: model.k]
    return _vote([model.labels[i] for i in nearest])


def knn_predict(model: KnnModel, X, max_cells: int = 20_000_000) -> list:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != model.X.shape[1]:
        raise DataError(f"queries have {X.shape[1]} features, training rows have {model.X.shape[1]}")
    chunk = max(1, max_cells // max(1, model.X.size))
    out = []
    for start in range(0, X.shape[0], chunk):
        block = X[start:start + chunk]
        dist = ((block[:, None, :] - model.X[None, :, :]) ** 2).sum(axis=2)
        nearest = np.argsort(dist, axis=1, kind="stable")[:, : model.k]
        out += [_vote([model.labels[i] for i in row]) for row in nearest]
    return out


@dataclass(frozen=True, eq=False)
class GnbModel:
    classes: tuple
    log_priors: np.ndarray
    means: np.ndarray
    variances: np.ndarray


def gnb_fit(X, labels, variance_floor: float = 1e-9) -> GnbModel:
    """Class priors plus per-class, per-feature mean and population variance."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    labels = np.asarray(list(labels), dtype=object)
    if X.shape[0] != labels.shape[0]:
        raise DataError(f"{X.shape[0]} rows but {labels.shape[0]} labels")
    classes = tuple(sorted(set(labels.tolist()), key=str))
    priors, means, variances = [], [], []
    for cls in classes:
        rows = X[labels == cls]
        if rows.shape[0] < 2:
            raise DataError(f"class {cls!r} has {rows.shape[0]} row(s); need at least 2")
        priors.append(math.log(rows.shape[0] / X.shape[0]))
        means.append(rows.mean(axis=0))
        variances.append(np.maximum(rows.var(axis=0), variance_floor))
    return GnbModel(classes, np.array(priors), np.array(means), np.array(variances))


def _gnb_scores(model: GnbModel, X: np.ndarray) -> np.ndarray:
    scores = np.empty((X.shape[0], len(model.classes)))
    for c in range(len(model.classes)):
        var = model.variances[c]
        ll = -0.5 * (np.log(2 * math.pi * var) + (X - model.means[c]) ** 2 / var).sum(axis=1)
        scores[:, c] = model.log_priors[c] + ll
    return scores


def _pick(model: GnbModel, row_scores: np.ndarray):
    best = row_scores.max()
    tied = [model.classes[c] for c in np.flatnonzero(row_scores == best)]
    return ATTACK if ATTACK in tied else tied[0]


def gnb_classify(model: GnbModel, row):
    """Class maximizing log prior + summed per-feature log density; ties -> Attack."""
    row = np.asarray(row, dtype=np.float64)
    if row.shape != (model.means.shape[1],):
        raise DataError(f"query has shape {row.shape}, model has {model.means.shape[1]} features")
    return _pick(model, _gnb_scores(model, row[None, :])[0])


def gnb_predict(model: GnbModel, X) -> list:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != model.means.shape[1]:
        raise DataError(f"queries have {X.shape[1]} features, model has {model.means.shape[1]}")
    return [_pick(model, s) for s in _gnb_scores(model, X)]
