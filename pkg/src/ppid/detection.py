"""Binary intrusion detector built from a fitted mixture.

Each mixture component is labelled Normal or Attack by majority vote of the
training rows it wins. A record's attack score is the posterior mass of the
Attack-labelled components.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from . import gmm
from .correlation import FeatureSelection
from .dataset import ATTACK, CLASSES, NORMAL, LabeledMatrix, Standardizer
from .errors import DataError, MissingColumnError

DETECTOR_HEADER = "ppid-detector"
DETECTOR_VERSION = 1


@dataclass(frozen=True)
class ClusterLabelMap:
    labels: tuple[str, ...]
    counts: tuple[tuple[int, int], ...]  # (normal, attack) training rows per component
    notes: tuple[str, ...] = ()

    @property
    def degenerate(self) -> bool:
        return bool(self.notes)

    @property
    def attack_mask(self) -> np.ndarray:
        return np.array([lab == ATTACK for lab in self.labels])


@dataclass(frozen=True)
class Detection:
    label: str
    attack_score: float
    component: int

    @property
    def normal_score(self) -> float:
        return 1.0 - self.attack_score


@dataclass(frozen=True, eq=False)
class DetectorModel:
    model: gmm.GmmModel
    cluster_map: ClusterLabelMap
    selection: FeatureSelection
    standardizer: Standardizer
    metadata: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if self.model.dim != len(self.selection.selected):
            raise DataError(
                f"model has {self.model.dim} dimensions but {len(self.selection.selected)} "
                "features are selected")
        if self.standardizer.feature_names != self.selection.selected:
            raise DataError("standardization stats do not cover the selected features")
        if len(self.cluster_map.labels) != self.model.n_components:
            raise DataError("every mixture component needs exactly one label")

    @property
    def features(self) -> tuple[str, ...]:
        return self.selection.selected

    def __eq__(self, other):
        if not isinstance(other, DetectorModel):
            return NotImplemented
        return dump_detector(self) == dump_detector(other)


def assign_cluster_labels(model: gmm.GmmModel, X, labels) -> ClusterLabelMap:
    """Majority-vote label per component; empty components and ties go to Attack."""
    labels = list(labels)
    X = np.asarray(X, dtype=np.float64)
    if X.shape[0] != len(labels):
        raise DataError(f"{X.shape[0]} rows but {len(labels)} labels")
    unknown = set(labels) - set(CLASSES)
    if unknown:
        raise DataError(f"labels must be binary, found {sorted(map(str, unknown))}")
    winners = np.argmax(gmm.predict_proba(model, X), axis=1)
    is_attack = np.array([lab == ATTACK for lab in labels], dtype=bool)
    out_labels, counts, notes = [], [], []
    for k in range(model.n_components):
        mine = winners == k
        n_attack = int((mine & is_attack).sum())
        n_normal = int(mine.sum()) - n_attack
        counts.append((n_normal, n_attack))
        out_labels.append(ATTACK if n_attack >= n_normal else NORMAL)
        if n_attack == n_normal == 0:
            notes.append(f"component {k} won no training rows; labelled Attack")
    if not is_attack.any() or is_attack.all():
        notes.append("training data holds a single class")
    elif len(set(out_labels)) < 2:
        notes.append(f"every component labelled {out_labels[0]}")
    return ClusterLabelMap(tuple(out_labels), tuple(counts), tuple(notes))


def _project(detector: DetectorModel, values: np.ndarray, names: Sequence[str]) -> np.ndarray:
    lookup = {n: i for i, n in enumerate(names)}
    idx = []
    for name in detector.features:
        if name not in lookup:
            raise MissingColumnError(name, "the scored data (the detector needs it)")
        idx.append(lookup[name])
    return detector.standardizer.apply(values[:, idx])


def _detect(detector: DetectorModel, Z: np.ndarray) -> list[Detection]:
    if Z.shape[0] == 0:
        return []
    post = gmm.predict_proba(detector.model, Z)
    mask = detector.cluster_map.attack_mask
    winners = np.argmax(post, axis=1)
    # an Attack component tying the top posterior wins, so label and score agree at 0.5
    top = post.max(axis=1, keepdims=True)
    tied_attack = (post == top) & mask
    has_tie = tied_attack.any(axis=1)
    winners[has_tie] = np.argmax(tied_attack[has_tie], axis=1)
    scores = np.clip(post[:, mask].sum(axis=1), 0.0, 1.0)
    labels = detector.cluster_map.labels
    return [Detection(labels[k], float(s), int(k)) for k, s in zip(winners, scores)]


def classify(detector: DetectorModel, row: Mapping[str, float]) -> Detection:
    """Score one raw record given as a feature-name -> value mapping.

    Only the detector's selected features are read.
    """
    missing = [n for n in detector.features if n not in row]
    if missing:
        raise MissingColumnError(missing[0])
    values = np.array([[float(row[n]) for n in detector.features]])
    return _detect(detector, _project(detector, values, detector.features))[0]


def score_dataset(detector: DetectorModel, matrix: LabeledMatrix) -> list[Detection]:
    """Classify every row of a raw (unstandardized) matrix, order preserved."""
    if matrix.n_rows == 0:
        return []
    Z = _project(detector, matrix.values, matrix.feature_names)
    return _detect(detector, Z)


# -- serialization --------------------------------------------------------

def _fmt(values) -> str:
    return " ".join(repr(float(v)) for v in values)


def dump_detector(detector: DetectorModel) -> str:
    sel = detector.selection
    lines = [f"{DETECTOR_HEADER} {DETECTOR_VERSION}"]
    for key in sorted(detector.metadata):
        lines.append(f"meta {key}={detector.metadata[key]}")
    lines += [f"total_features {sel.total}",
              f"percentage {repr(float(sel.percentage))}",
              f"features {len(sel.selected)}"]
    lines += [f"feature {name}" for name in sel.selected]
    lines += [f"center {_fmt(detector.standardizer.mean)}",
              f"scale {_fmt(detector.standardizer.std)}"]
    lines += gmm.dump_lines(detector.model)
    cm = detector.cluster_map
    for lab, (n_norm, n_att) in zip(cm.labels, cm.counts):
        lines.append(f"cluster {lab} {n_norm} {n_att}")
    lines += [f"note {note}" for note in cm.notes]
    return "\n".join(lines) + "\n"


def _take(lines, key):
    line = next(lines, None)
    if line is None:
        raise DataError(f"detector file truncated; expected {key!r}")
    head, _, rest = line.partition(" ")
    if head != key:
        raise DataError(f"detector file: expected {key!r}, found {head!r}")
    return rest


def parse_detector(text: str) -> DetectorModel:
    all_lines = text.splitlines()
    lines = iter(all_lines)
    version = _take(lines, DETECTOR_HEADER)
    if version.strip() != str(DETECTOR_VERSION):
        raise DataError(f"unsupported detector format version {version!r}")
    metadata = {}
    line = next(lines, "")
    while line.startswith("meta "):
        key, _, value = line[5:].partition("=")
        metadata[key] = value
        line = next(lines, "")
    lines = iter([line, *lines])
    total = int(_take(lines, "total_features"))
    percentage = float(_take(lines, "percentage"))
    n = int(_take(lines, "features"))
    names = tuple(_take(lines, "feature") for _ in range(n))
    center = np.array([float(t) for t in _take(lines, "center").split()])
    scale = np.array([float(t) for t in _take(lines, "scale").split()])
    model = gmm.parse_lines(lines)
    labels, counts, notes = [], [], []
    for _ in range(model.n_components):
        lab, n_norm, n_att = _take(lines, "cluster").split()
        labels.append(lab)
        counts.append((int(n_norm), int(n_att)))
    for line in lines:
        if line.startswith("note "):
            notes.append(line[5:])
    return DetectorModel(
        model,
        ClusterLabelMap(tuple(labels), tuple(counts), tuple(notes)),
        FeatureSelection(names, percentage, total),
        Standardizer(names, center.reshape(n), scale.reshape(n)),
        metadata,
    )


def save_detector(detector: DetectorModel, path) -> None:
    Path(path).write_text(dump_detector(detector), encoding="utf-8")


def load_detector(path) -> DetectorModel:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"detector file not found: {path}")
    return parse_detector(path.read_text(encoding="utf-8"))
