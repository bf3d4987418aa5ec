"""Loading, cleaning, standardizing and splitting labelled telemetry tables.

The canonical instance is the multiclass power-system dataset: four PMUs
(R1-R4) with 29 measurements each and a ``marker`` column holding the
scenario number. Scenario numbers are mapped to the binary classes used for
evaluation through a :class:`LabelMap`.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import (
    ConfigError,
    DataError,
    EmptyDatasetError,
    MissingColumnError,
    UnmappedLabelError,
)

logger = logging.getLogger(__name__)

NORMAL = "Normal"
ATTACK = "Attack"
CLASSES = (NORMAL, ATTACK)

DEFAULT_LABEL_COLUMN = "marker"
DEFAULT_SENTINEL = 1e12


@dataclass(frozen=True)
class DatasetSchema:
    feature_columns: tuple[str, ...]
    label_column: str = DEFAULT_LABEL_COLUMN
    delimiter: str = ","

    def __post_init__(self):
        cols = tuple(self.feature_columns)
        object.__setattr__(self, "feature_columns", cols)
        if not cols:
            raise ConfigError("schema needs at least one feature column")
        if len(set(cols)) != len(cols):
            dupes = sorted({c for c in cols if cols.count(c) > 1})
            raise ConfigError(f"duplicate feature columns: {dupes}")
        if self.label_column in cols:
            raise ConfigError(f"label column {self.label_column!r} is also listed as a feature")
        if len(self.delimiter) != 1:
            raise ConfigError(f"delimiter must be a single character, got {self.delimiter!r}")


def power_system_features() -> tuple[str, ...]:
    """The 116 PMU measurement columns (29 per relay R1-R4), in file order."""
    names = []
    for relay in range(1, 5):
        r = f"R{relay}"
        for i in range(1, 13):
            # angles of voltage channels end in VH, current channels in IH
            kind = ("VH", "V") if i in (1, 2, 3, 7, 8, 9) else ("IH", "I")
            names.append(f"{r}-PA{i}:{kind[0]}")
            names.append(f"{r}-PM{i}:{kind[1]}")
        names += [f"{r}:F", f"{r}:DF", f"{r}-PA:Z", f"{r}-PA:ZH", f"{r}:S"]
    return tuple(names)


def power_system_schema() -> DatasetSchema:
    return DatasetSchema(power_system_features(), DEFAULT_LABEL_COLUMN, ",")


@dataclass(frozen=True, eq=False)
class LabeledMatrix:
    """Numeric feature table with one label per row.

    ``labels`` holds either the binary classes (``"Normal"``/``"Attack"``) or
    raw scenario identifiers as read from the file.
    """

    values: np.ndarray
    feature_names: tuple[str, ...]
    labels: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim == 1 and values.size == 0:
            values = values.reshape(0, len(self.feature_names))
        if values.ndim != 2:
            raise DataError(f"values must be 2-D, got shape {values.shape}")
        labels = np.empty(len(self.labels), dtype=object)
        labels[:] = list(self.labels)
        names = tuple(self.feature_names)
        if values.shape[0] != labels.shape[0]:
            raise DataError(f"{values.shape[0]} rows but {labels.shape[0]} labels")
        if values.shape[1] != len(names):
            raise DataError(f"{values.shape[1]} columns but {len(names)} feature names")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "feature_names", names)

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def n_features(self) -> int:
        return self.values.shape[1]

    def take(self, rows) -> "LabeledMatrix":
        rows = np.asarray(rows, dtype=np.intp)
        return LabeledMatrix(self.values[rows], self.feature_names, self.labels[rows])

    def column_indices(self, names: Sequence[str]) -> np.ndarray:
        lookup = {n: i for i, n in enumerate(self.feature_names)}
        out = []
        for n in names:
            if n not in lookup:
                raise MissingColumnError(n)
            out.append(lookup[n])
        return np.asarray(out, dtype=np.intp)

    def select(self, names: Sequence[str]) -> "LabeledMatrix":
        idx = self.column_indices(names)
        return LabeledMatrix(self.values[:, idx], tuple(names), self.labels)

    def __eq__(self, other):
        if not isinstance(other, LabeledMatrix):
            return NotImplemented
        return (
            self.feature_names == other.feature_names
            and self.values.shape == other.values.shape
            and np.array_equal(self.values, other.values, equal_nan=True)
            and list(self.labels) == list(other.labels)
        )


def _parse_label(token: str):
    token = token.strip()
    try:
        return int(token)
    except ValueError:
        return token


def _parse_cell(token: str) -> tuple[float, bool]:
    try:
        return float(token), True
    except ValueError:
        return math.nan, False


def read_header(path, delimiter: str = ",") -> list[str]:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"dataset file not found: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        header = next(csv.reader(fh, delimiter=delimiter), None)
    if header is None:
        raise EmptyDatasetError(f"{path} has no header row")
    return [h.strip() for h in header]


def infer_schema(path, label_column: str = DEFAULT_LABEL_COLUMN, delimiter: str = ",") -> DatasetSchema:
    """Schema using every header column except the label column as a feature."""
    header = read_header(path, delimiter)
    if label_column not in header:
        raise MissingColumnError(label_column, str(path))
    return DatasetSchema(tuple(h for h in header if h != label_column), label_column, delimiter)


def load_csv(path, schema: DatasetSchema) -> LabeledMatrix:
    """Read a headered CSV into a :class:`LabeledMatrix`.

    Columns are reordered to ``schema.feature_columns``; header columns not in
    the schema are ignored. Cells that do not parse as numbers become NaN and
    ``Inf``/``NaN`` tokens keep their IEEE meaning, so :func:`sanitize` decides
    what happens to them.
    """
    path = Path(path)
    header = read_header(path, schema.delimiter)
    positions = {}
    for i, name in enumerate(header):
        positions.setdefault(name, i)
    for name in (*schema.feature_columns, schema.label_column):
        if name not in positions:
            raise MissingColumnError(name, str(path))
    feat_pos = [positions[n] for n in schema.feature_columns]
    label_pos = positions[schema.label_column]

    rows, labels = [], []
    bad_cells = 0
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh, delimiter=schema.delimiter)
        next(reader)
        for lineno, record in enumerate(reader, start=2):
            if not record or (len(record) == 1 and not record[0].strip()):
                continue
            if len(record) != len(header):
                raise DataError(
                    f"{path}: row {lineno} has {len(record)} fields, header has {len(header)}"
                )
            row = []
            for p in feat_pos:
                value, ok = _parse_cell(record[p])
                bad_cells += not ok
                row.append(value)
            rows.append(row)
            labels.append(_parse_label(record[label_pos]))
    if not rows:
        raise EmptyDatasetError(f"{path} contains no data rows")
    if bad_cells:
        logger.warning("%s: %d non-numeric cells read as NaN", path, bad_cells)
    values = np.asarray(rows, dtype=np.float64)
    return LabeledMatrix(values, schema.feature_columns, labels)


def _format_value(v: float) -> str:
    if math.isnan(v):
        return "NaN"
    if math.isinf(v):
        return "Inf" if v > 0 else "-Inf"
    return repr(float(v))


def write_csv(matrix: LabeledMatrix, path, label_column: str = DEFAULT_LABEL_COLUMN,
              delimiter: str = ",") -> None:
    """Write ``matrix`` so that :func:`load_csv` reads back identical values."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        writer.writerow([*matrix.feature_names, label_column])
        for row, label in zip(matrix.values, matrix.labels):
            writer.writerow([*(_format_value(v) for v in row), str(label)])


# -- labels ---------------------------------------------------------------

@dataclass(frozen=True)
class LabelMap:
    mapping: Mapping = field(default_factory=dict)

    def __post_init__(self):
        bad = {k: v for k, v in self.mapping.items() if v not in CLASSES}
        if bad:
            raise ConfigError(f"label map classes must be Normal or Attack, got {bad}")

    def __getitem__(self, scenario):
        try:
            return self.mapping[scenario]
        except KeyError:
            raise UnmappedLabelError(scenario) from None

    def __len__(self):
        return len(self.mapping)


# scenario numbering of the multiclass power-system dataset
NATURAL_SCENARIOS = (1, 2, 3, 4, 5, 6, 13, 14)
NO_EVENT_SCENARIOS = (41,)
ATTACK_SCENARIOS = tuple(range(7, 13)) + tuple(range(15, 31)) + tuple(range(35, 41))


def canonical_label_map() -> LabelMap:
    """Scenario map for the 37-scenario multiclass power-system dataset.

    Short-circuit faults (1-6) and line maintenance (13, 14) are natural
    events and scenario 41 is the no-event baseline; all of these are Normal.
    Data injection (7-12), remote tripping (15-20) and relay-setting changes
    (21-30, 35-40) are Attack.
    """
    mapping = {s: NORMAL for s in NATURAL_SCENARIOS + NO_EVENT_SCENARIOS}
    mapping.update({s: ATTACK for s in ATTACK_SCENARIOS})
    return LabelMap(mapping)


def binary_label_map() -> LabelMap:
    """Identity map for already-binary labels, plus the three-class variant's tags."""
    return LabelMap({NORMAL: NORMAL, ATTACK: ATTACK, "Natural": NORMAL, "NoEvents": NORMAL})


def load_label_map(path) -> LabelMap:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"label map file not found: {path}")
    mapping = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = [h.strip() for h in next(reader, [])]
        if header != ["scenario", "class"]:
            raise ConfigError(f"{path}: expected header 'scenario,class', got {header}")
        for lineno, record in enumerate(reader, start=2):
            if not record:
                continue
            if len(record) != 2:
                raise ConfigError(f"{path}: row {lineno} must have 2 fields")
            scenario, cls = _parse_label(record[0]), record[1].strip()
            if cls not in CLASSES:
                raise ConfigError(f"{path}: row {lineno} class {cls!r} is not Normal/Attack")
            mapping[scenario] = cls
    return LabelMap(mapping)


def write_label_map(label_map: LabelMap, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["scenario", "class"])
        for scenario in sorted(label_map.mapping, key=lambda s: (isinstance(s, str), s)):
            writer.writerow([scenario, label_map.mapping[scenario]])


def map_labels(matrix: LabeledMatrix, label_map: LabelMap) -> LabeledMatrix:
    mapped = [label_map[label] for label in matrix.labels]
    return LabeledMatrix(matrix.values, matrix.feature_names, mapped)


# -- preprocessing --------------------------------------------------------

@dataclass(frozen=True)
class PreprocessConfig:
    seed: int
    nonfinite_policy: str = "clamp"
    sentinel: float = DEFAULT_SENTINEL
    standardize: bool = True
    split_fraction: float = 0.7

    def __post_init__(self):
        if self.nonfinite_policy not in ("clamp", "drop_row"):
            raise ConfigError(f"unknown nonfinite_policy {self.nonfinite_policy!r}")
        if not 0.0 < self.split_fraction < 1.0:
            raise ConfigError(f"split_fraction must lie in (0, 1), got {self.split_fraction}")
        if not (isinstance(self.seed, (int, np.integer)) and self.seed >= 0):
            raise ConfigError(f"seed must be a non-negative integer, got {self.seed!r}")
        if not self.sentinel > 0:
            raise ConfigError("sentinel must be positive")


def sanitize(matrix: LabeledMatrix, policy: str = "clamp",
             sentinel: float = DEFAULT_SENTINEL) -> LabeledMatrix:
    """Remove non-finite cells.

    ``drop_row`` discards any row holding a non-finite cell. ``clamp`` maps
    +/-inf to +/-``sentinel`` and NaN to the median of the column's finite
    values (0.0 if the column has none).
    """
    values = matrix.values
    bad = ~np.isfinite(values)
    if not bad.any():
        return matrix
    if policy == "drop_row":
        keep = ~bad.any(axis=1)
        if not keep.any():
            raise EmptyDatasetError("every row contains a non-finite value")
        logger.info("dropping %d rows with non-finite cells", int((~keep).sum()))
        return matrix.take(np.flatnonzero(keep))
    if policy != "clamp":
        raise ConfigError(f"unknown nonfinite_policy {policy!r}")

    out = values.copy()
    out[np.isposinf(values)] = sentinel
    out[np.isneginf(values)] = -sentinel
    for j in np.flatnonzero(np.isnan(values).any(axis=0)):
        col = values[:, j]
        finite = col[np.isfinite(col)]
        fill = float(np.median(finite)) if finite.size else 0.0
        out[np.isnan(col), j] = fill
    return LabeledMatrix(out, matrix.feature_names, matrix.labels)


@dataclass(frozen=True, eq=False)
class Standardizer:
    """Per-feature mean and population standard deviation."""

    feature_names: tuple[str, ...]
    mean: np.ndarray
    std: np.ndarray

    @property
    def zero_variance(self) -> np.ndarray:
        return self.std == 0

    def apply(self, values: np.ndarray) -> np.ndarray:
        values = np.asarray(values, dtype=np.float64)
        zero = self.zero_variance
        out = (values - self.mean) / np.where(zero, 1.0, self.std)
        out[..., zero] = 0.0
        return out

    def transform(self, matrix: LabeledMatrix) -> LabeledMatrix:
        projected = matrix.select(self.feature_names)
        return LabeledMatrix(self.apply(projected.values), self.feature_names, matrix.labels)

    def subset(self, names: Sequence[str]) -> "Standardizer":
        lookup = {n: i for i, n in enumerate(self.feature_names)}
        idx = [lookup[n] for n in names]
        return Standardizer(tuple(names), self.mean[idx].copy(), self.std[idx].copy())

    def __eq__(self, other):
        if not isinstance(other, Standardizer):
            return NotImplemented
        return (self.feature_names == other.feature_names
                and np.array_equal(self.mean, other.mean)
                and np.array_equal(self.std, other.std))


def fit_standardizer(matrix: LabeledMatrix) -> Standardizer:
    values = matrix.values
    if matrix.n_rows == 0:
        raise EmptyDatasetError("cannot standardize an empty matrix")
    mean = values.mean(axis=0)
    std = values.std(axis=0)
    # constant columns can leave roundoff in std; force them to exactly zero
    std[np.ptp(values, axis=0) == 0] = 0.0
    return Standardizer(matrix.feature_names, mean, std)


def standardize(matrix: LabeledMatrix) -> tuple[LabeledMatrix, Standardizer]:
    """Return the z-scored matrix and the statistics that produced it.

    Zero-variance columns become all zeros; they are flagged through
    ``Standardizer.zero_variance``.
    """
    stats = fit_standardizer(matrix)
    zero = stats.zero_variance
    if zero.any():
        flagged = [n for n, z in zip(matrix.feature_names, zero) if z]
        logger.info("zero-variance features: %s", ", ".join(flagged))
    return LabeledMatrix(stats.apply(matrix.values), matrix.feature_names, matrix.labels), stats


def split_indices(labels, fraction: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Stratified train/test row indices, each sorted ascending."""
    if not 0.0 < fraction < 1.0:
        raise ConfigError(f"split_fraction must lie in (0, 1), got {fraction}")
    labels = np.asarray(labels, dtype=object)
    rng = np.random.default_rng(seed)
    train, test = [], []
    for cls in sorted(set(labels.tolist()), key=str):
        idx = np.flatnonzero(labels == cls)
        if idx.size < 2:
            raise DataError(f"class {cls!r} has {idx.size} row(s); stratified split needs at least 2")
        perm = rng.permutation(idx)
        n_train = int(math.floor(fraction * idx.size + 0.5))
        n_train = min(max(n_train, 1), idx.size - 1)
        train.append(perm[:n_train])
        test.append(perm[n_train:])
    return np.sort(np.concatenate(train)), np.sort(np.concatenate(test))


def split(matrix: LabeledMatrix, config: PreprocessConfig) -> tuple[LabeledMatrix, LabeledMatrix]:
    train_idx, test_idx = split_indices(matrix.labels, config.split_fraction, config.seed)
    return matrix.take(train_idx), matrix.take(test_idx)


# -- synthetic data -------------------------------------------------------

@dataclass(frozen=True)
class SynthClass:
    label: object
    count: int
    mean: Sequence[float]
    std: Sequence[float]


def synth_generate(classes: Sequence[SynthClass], seed: int,
                   feature_names: Sequence[str] | None = None) -> LabeledMatrix:
    """Draw independent Gaussian rows per class, classes in the given order."""
    if not classes:
        raise ConfigError("no classes given")
    dim = len(classes[0].mean)
    for c in classes:
        if len(c.mean) != dim or len(c.std) != dim:
            raise ConfigError(f"class {c.label!r}: mean/std length differs from {dim}")
        if any(not s > 0 for s in c.std):
            raise ConfigError(f"class {c.label!r}: standard deviations must be positive")
        if c.count < 0:
            raise ConfigError(f"class {c.label!r}: negative count")
    if feature_names is None:
        feature_names = tuple(f"f{j + 1}" for j in range(dim))
    elif len(feature_names) != dim:
        raise ConfigError(f"{len(feature_names)} feature names for {dim} dimensions")
    if sum(c.count for c in classes) == 0:
        raise EmptyDatasetError("synthetic spec requests zero rows")

    rng = np.random.default_rng(seed)
    blocks, labels = [], []
    for c in classes:
        blocks.append(rng.normal(np.asarray(c.mean, float), np.asarray(c.std, float),
                                 size=(c.count, dim)))
        labels += [c.label] * c.count
    return LabeledMatrix(np.vstack(blocks), tuple(feature_names), labels)
