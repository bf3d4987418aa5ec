"""Pearson correlation, feature ranking and disclosure-limited selection."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .dataset import ATTACK, NORMAL, LabeledMatrix
from .errors import ConfigError, DataError, UndefinedCorrelationError

LABEL_CORRELATION = "label_correlation"
MEAN_PAIRWISE = "mean_pairwise"
RANKING_MODES = (LABEL_CORRELATION, MEAN_PAIRWISE)


def _clamp(r: float) -> float:
    return min(1.0, max(-1.0, r))


def pcc(x, y) -> float:
    """Pearson correlation of two equal-length vectors.

    Sum of centered cross products divided by the product of the centered
    L2 norms, taken as one square root so exact linear relations give +/-1.
    Raises :class:`UndefinedCorrelationError` when either vector is constant.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim != 1 or y.ndim != 1 or x.shape != y.shape:
        raise DataError(f"pcc needs equal-length vectors, got {x.shape} and {y.shape}")
    if x.size < 2:
        raise DataError("pcc needs at least 2 observations")
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        raise UndefinedCorrelationError("correlation undefined for a zero-variance vector")
    dx = x - x.mean()
    dy = y - y.mean()
    num = float(np.dot(dx, dy))
    sxx, syy = float(np.dot(dx, dx)), float(np.dot(dy, dy))
    den = math.sqrt(sxx * syy)
    if not 0 < den < math.inf:
        # the product under- or overflowed
        den = math.sqrt(sxx) * math.sqrt(syy)
    if den == 0:
        raise UndefinedCorrelationError("correlation undefined: variance underflows to zero")
    return _clamp(num / den)


def correlation_matrix(matrix) -> np.ndarray:
    """Symmetric feature-by-feature PCC matrix.

    Off-diagonal entries involving a constant column are NaN (undefined);
    the diagonal is always 1.
    """
    values = matrix.values if isinstance(matrix, LabeledMatrix) else np.asarray(matrix, float)
    n, d = values.shape
    if n < 2:
        raise DataError("correlation matrix needs at least 2 rows")
    centered = values - values.mean(axis=0)
    norms = np.sqrt(np.einsum("ij,ij->j", centered, centered))
    constant = np.ptp(values, axis=0) == 0
    safe = np.where(constant, 1.0, norms)
    unit = centered / safe
    corr = unit.T @ unit
    corr = np.triu(corr, 1)
    corr = corr + corr.T
    np.clip(corr, -1.0, 1.0, out=corr)
    corr[constant, :] = np.nan
    corr[:, constant] = np.nan
    np.fill_diagonal(corr, 1.0)
    return corr


@dataclass(frozen=True)
class CorrelationRanking:
    entries: tuple[tuple[str, float], ...]
    mode: str

    @property
    def features(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.entries)

    def __len__(self):
        return len(self.entries)


def _sorted_entries(names, scores):
    return tuple(sorted(zip(names, (float(s) for s in scores)), key=lambda e: (-e[1], e[0])))


def label_encoding(labels) -> np.ndarray:
    """Normal -> 0, Attack -> 1."""
    out = np.empty(len(labels), dtype=np.float64)
    for i, label in enumerate(labels):
        if label == NORMAL:
            out[i] = 0.0
        elif label == ATTACK:
            out[i] = 1.0
        else:
            raise DataError(f"label {label!r} is not binary; map labels first")
    return out


def rank_features(matrix: LabeledMatrix, mode: str = LABEL_CORRELATION) -> CorrelationRanking:
    """Rank features by correlation magnitude, highest first.

    ``label_correlation`` scores a feature by |PCC| against the binary label
    encoding; ``mean_pairwise`` by its mean |PCC| against every other feature
    (undefined entries skipped). Constant features score 0. Ties are broken by
    ascending feature name.
    """
    names = matrix.feature_names
    if mode == LABEL_CORRELATION:
        target = label_encoding(matrix.labels)
        if np.ptp(target) == 0:
            raise UndefinedCorrelationError(
                "labels contain a single class; label correlation is undefined for every feature")
        scores = []
        for j in range(matrix.n_features):
            try:
                scores.append(abs(pcc(matrix.values[:, j], target)))
            except UndefinedCorrelationError:
                scores.append(0.0)
    elif mode == MEAN_PAIRWISE:
        corr = np.abs(correlation_matrix(matrix))
        np.fill_diagonal(corr, np.nan)
        defined = ~np.isnan(corr)
        if not defined.any():
            raise UndefinedCorrelationError("no pair of features has a defined correlation")
        totals = np.where(defined, corr, 0.0).sum(axis=1)
        counts = defined.sum(axis=1)
        scores = np.where(counts > 0, totals / np.maximum(counts, 1), 0.0)
    else:
        raise ConfigError(f"unknown ranking mode {mode!r}; expected one of {RANKING_MODES}")
    return CorrelationRanking(_sorted_entries(names, scores), mode)


@dataclass(frozen=True)
class FeatureSelection:
    selected: tuple[str, ...]
    percentage: float
    total: int

    @property
    def disclosure(self) -> float:
        return disclosure_percentage(self)


def selection_size(n_features: int, percentage: float) -> int:
    """ceil(percentage/100 * n) in exact decimal arithmetic."""
    if not 0 < percentage <= 100:
        raise ConfigError(f"feature percentage must lie in (0, 100], got {percentage}")
    return math.ceil(Fraction(str(percentage)) * n_features / 100)


def select_quartile(ranking: CorrelationRanking, percentage: float) -> FeatureSelection:
    """Keep the top ``percentage`` percent of ranked features (rounded up)."""
    count = selection_size(len(ranking), percentage)
    return FeatureSelection(ranking.features[:count], percentage, len(ranking))


def disclosure_percentage(selection: FeatureSelection) -> float:
    """Share of the data source's features the detector gets to see."""
    if not selection.selected or selection.total <= 0:
        raise ConfigError("empty feature selection")
    return len(selection.selected) / selection.total


def write_ranking(ranking: CorrelationRanking, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["rank", "feature", "score"])
        for i, (name, score) in enumerate(ranking.entries, start=1):
            writer.writerow([i, name, repr(score)])


def read_ranking(path, mode: str = LABEL_CORRELATION) -> CorrelationRanking:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        entries = tuple((row["feature"], float(row["score"])) for row in reader)
    return CorrelationRanking(entries, mode)


def write_selection(selection: FeatureSelection, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.writelines(f"{name}\n" for name in selection.selected)


def read_selection(path, total: int, percentage: float = math.nan) -> FeatureSelection:
    with open(path, encoding="utf-8") as fh:
        names: Sequence[str] = tuple(line.strip() for line in fh if line.strip())
    return FeatureSelection(tuple(names), percentage, total)
