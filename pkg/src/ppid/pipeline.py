"""End-to-end wiring: ingest -> rank/select -> fit -> label -> evaluate.

Every stage consumes the same stratified split so that results for
different feature percentages differ only in the features used.
"""

from __future__ import annotations

import configparser
import contextlib
import csv
import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import baselines, correlation, gmm, metrics
from .dataset import (
    DEFAULT_LABEL_COLUMN,
    DEFAULT_SENTINEL,
    DatasetSchema,
    LabeledMatrix,
    LabelMap,
    PreprocessConfig,
    Standardizer,
    binary_label_map,
    canonical_label_map,
    fit_standardizer,
    infer_schema,
    load_csv,
    load_label_map,
    map_labels,
    power_system_schema,
    sanitize,
    split_indices,
)
from .detection import DetectorModel, assign_cluster_labels, score_dataset
from .errors import ConfigError, PpidError

logger = logging.getLogger(__name__)

DEFAULT_PERCENTAGES = (25.0, 50.0, 75.0, 100.0)


@contextlib.contextmanager
def stage(name: str):
    """Tag any pipeline error raised inside the block with the stage name."""
    try:
        yield
    except PpidError as err:
        if not getattr(err, "stage", None):
            err.stage = name
        raise


@dataclass(frozen=True)
class RunConfig:
    seed: int
    dataset: Path | None = None
    label_column: str = DEFAULT_LABEL_COLUMN
    delimiter: str = ","
    features: str | tuple[str, ...] = "all"
    label_map: str = "auto"
    nonfinite_policy: str = "clamp"
    sentinel: float = DEFAULT_SENTINEL
    standardize: bool = True
    split_fraction: float = 0.7
    ranking_mode: str = correlation.LABEL_CORRELATION
    percentages: tuple[float, ...] = DEFAULT_PERCENTAGES
    n_components: int = 2
    epsilon: float = 1e-6
    max_iterations: int = 200
    init_method: str = gmm.FARTHEST_POINT
    variance_floor: float = 1e-6
    baselines: bool = True
    knn_k: int = 1
    out: Path = Path("results")

    def __post_init__(self):
        if self.seed is None:
            raise ConfigError("a seed is required (config [run] seed or --seed)")
        if not self.percentages:
            raise ConfigError("at least one feature percentage is required")
        for p in self.percentages:
            if not 0 < p <= 100:
                raise ConfigError(f"feature percentage must lie in (0, 100], got {p}")
        if self.ranking_mode not in correlation.RANKING_MODES:
            raise ConfigError(f"unknown ranking mode {self.ranking_mode!r}")
        # validate the derived configs eagerly
        self.preprocess_config()
        self.gmm_config()

    def preprocess_config(self) -> PreprocessConfig:
        return PreprocessConfig(self.seed, self.nonfinite_policy, self.sentinel,
                                self.standardize, self.split_fraction)

    def gmm_config(self) -> gmm.GmmConfig:
        return gmm.GmmConfig(self.n_components, self.epsilon, self.max_iterations,
                             self.seed, self.init_method, self.variance_floor)


def _floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(t) for t in text.replace(",", " ").split())
    except ValueError:
        raise ConfigError(f"expected a list of numbers, got {text!r}") from None


_CONFIG_KEYS = {
    # (section, key): (field, parser)
    ("data", "path"): ("dataset", Path),
    ("data", "label_column"): ("label_column", str),
    ("data", "delimiter"): ("delimiter", str),
    ("data", "features"): ("features", str),
    ("data", "label_map"): ("label_map", str),
    ("preprocess", "nonfinite_policy"): ("nonfinite_policy", str),
    ("preprocess", "sentinel"): ("sentinel", float),
    ("preprocess", "standardize"): ("standardize", "bool"),
    ("preprocess", "split_fraction"): ("split_fraction", float),
    ("ranking", "mode"): ("ranking_mode", str),
    ("ranking", "percentages"): ("percentages", _floats),
    ("gmm", "components"): ("n_components", int),
    ("gmm", "epsilon"): ("epsilon", float),
    ("gmm", "max_iterations"): ("max_iterations", int),
    ("gmm", "init_method"): ("init_method", str),
    ("gmm", "variance_floor"): ("variance_floor", float),
    ("baselines", "enabled"): ("baselines", "bool"),
    ("baselines", "knn_k"): ("knn_k", int),
    ("run", "seed"): ("seed", int),
    ("run", "out"): ("out", Path),
}


def read_config_file(path) -> dict:
    """Parse an INI-style config into RunConfig keyword arguments."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        parser.read(path, encoding="utf-8")
    except configparser.Error as err:
        raise ConfigError(f"{path}: {err}") from None
    values = {}
    for section in parser.sections():
        for key in parser[section]:
            if (section, key) not in _CONFIG_KEYS:
                raise ConfigError(f"{path}: unknown setting [{section}] {key}")
            name, conv = _CONFIG_KEYS[section, key]
            try:
                if conv == "bool":
                    values[name] = parser.getboolean(section, key)
                else:
                    values[name] = conv(parser.get(section, key))
            except ValueError as err:
                raise ConfigError(f"{path}: [{section}] {key}: {err}") from None
    # relative paths are taken from the config file's directory
    for name in ("dataset", "out"):
        if name in values and not values[name].is_absolute():
            values[name] = path.parent / values[name]
    lm = values.get("label_map")
    if lm and lm not in ("auto", "canonical", "binary") and not Path(lm).is_absolute():
        values["label_map"] = str(path.parent / lm)
    return values


def load_config(path=None, **overrides) -> RunConfig:
    values = read_config_file(path) if path else {}
    values.update({k: v for k, v in overrides.items() if v is not None})
    if values.get("seed") is None:
        raise ConfigError("a seed is required (config [run] seed or --seed)")
    try:
        return RunConfig(**values)
    except TypeError as err:
        raise ConfigError(str(err)) from None


# -- data preparation -----------------------------------------------------

def resolve_schema(config: RunConfig) -> DatasetSchema:
    if config.dataset is None:
        raise ConfigError("no dataset given (config [data] path or --dataset)")
    if config.features == "all":
        return infer_schema(config.dataset, config.label_column, config.delimiter)
    if config.features == "power_system":
        schema = power_system_schema()
        return DatasetSchema(schema.feature_columns, config.label_column, config.delimiter)
    names = config.features
    if isinstance(names, str):
        names = tuple(n.strip() for n in names.split(",") if n.strip())
    return DatasetSchema(tuple(names), config.label_column, config.delimiter)


def resolve_label_map(config: RunConfig, raw_labels) -> LabelMap:
    choice = config.label_map
    if choice == "canonical":
        return canonical_label_map()
    if choice == "binary":
        return binary_label_map()
    if choice == "auto":
        binary = binary_label_map()
        if all(isinstance(lab, str) and lab in binary.mapping for lab in set(raw_labels)):
            return binary
        return canonical_label_map()
    return load_label_map(choice)


@dataclass(frozen=True, eq=False)
class PreparedData:
    """Sanitized, binary-labelled data split into train and test rows."""

    data: LabeledMatrix
    train_idx: np.ndarray
    test_idx: np.ndarray
    standardizer: Standardizer
    train: LabeledMatrix = field(init=False)
    test: LabeledMatrix = field(init=False)
    train_std: LabeledMatrix = field(init=False)

    def __post_init__(self):
        train = self.data.take(self.train_idx)
        object.__setattr__(self, "train", train)
        object.__setattr__(self, "test", self.data.take(self.test_idx))
        object.__setattr__(self, "train_std", self.standardizer.transform(train))


def identity_standardizer(names: Sequence[str]) -> Standardizer:
    return Standardizer(tuple(names), np.zeros(len(names)), np.ones(len(names)))


def prepare_matrix(matrix: LabeledMatrix, config: RunConfig) -> PreparedData:
    with stage("sanitize"):
        clean = sanitize(matrix, config.nonfinite_policy, config.sentinel)
    with stage("label mapping"):
        clean = map_labels(clean, resolve_label_map(config, clean.labels))
    with stage("split"):
        train_idx, test_idx = split_indices(clean.labels, config.split_fraction, config.seed)
    with stage("standardize"):
        if config.standardize:
            stats = fit_standardizer(clean.take(train_idx))
        else:
            stats = identity_standardizer(clean.feature_names)
    return PreparedData(clean, train_idx, test_idx, stats)


def load_dataset(config: RunConfig) -> LabeledMatrix:
    with stage("load"):
        return load_csv(config.dataset, resolve_schema(config))


def prepare(config: RunConfig) -> PreparedData:
    return prepare_matrix(load_dataset(config), config)


# -- training and evaluation ---------------------------------------------

def rank(prepared: PreparedData, config: RunConfig) -> correlation.CorrelationRanking:
    with stage("rank"):
        return correlation.rank_features(prepared.train_std, config.ranking_mode)


def train_detector(prepared: PreparedData, ranking: correlation.CorrelationRanking,
                   percentage: float, config: RunConfig) -> tuple[DetectorModel, gmm.FitTrace]:
    with stage("select"):
        selection = correlation.select_quartile(ranking, percentage)
    Z = prepared.train_std.select(selection.selected).values
    with stage("fit"):
        model, trace = gmm.fit(Z, config.gmm_config())
    with stage("cluster labelling"):
        cluster_map = assign_cluster_labels(model, Z, prepared.train.labels)
    for note in cluster_map.notes:
        logger.warning("cluster labelling: %s", note)
    meta = {
        "ranking_mode": config.ranking_mode,
        "seed": str(config.seed),
        "iterations": str(trace.iterations_run),
        "converged": str(trace.converged).lower(),
    }
    detector = DetectorModel(model, cluster_map, selection,
                             prepared.standardizer.subset(selection.selected), meta)
    return detector, trace


def evaluate(detector: DetectorModel, matrix: LabeledMatrix
             ) -> tuple[metrics.EvaluationReport, metrics.RocCurve]:
    with stage("evaluate"):
        detections = score_dataset(detector, matrix)
        cm = metrics.confusion([d.label for d in detections], matrix.labels)
        curve = metrics.roc_curve([d.attack_score for d in detections], matrix.labels)
        sel = detector.selection
        report = metrics.EvaluationReport.from_confusion(
            cm, sel.disclosure, sel.percentage, curve.auc, len(sel.selected))
    return report, curve


@dataclass(frozen=True)
class BaselineResult:
    technique: str
    percentage: float
    detection_rate: float
    fpr: float


def run_baselines(prepared: PreparedData, selection: correlation.FeatureSelection,
                  config: RunConfig) -> list[BaselineResult]:
    names = selection.selected
    Xtr = prepared.train_std.select(names).values
    Xte = prepared.standardizer.subset(names).apply(prepared.test.select(names).values)
    truth = prepared.test.labels
    out = []
    with stage("baselines"):
        knn = baselines.knn_fit(Xtr, prepared.train.labels, config.knn_k)
        nb = baselines.gnb_fit(Xtr, prepared.train.labels)
        for technique, predicted in (
            (f"Nearest Neighbour (k={config.knn_k})", baselines.knn_predict(knn, Xte)),
            ("Naive Bayes", baselines.gnb_predict(nb, Xte)),
        ):
            cm = metrics.confusion(predicted, truth)
            out.append(BaselineResult(technique, selection.percentage,
                                      metrics.detection_rate(cm),
                                      metrics.false_positive_rate(cm)))
    return out


@dataclass
class SweepRow:
    percentage: float
    detector: DetectorModel
    trace: gmm.FitTrace
    report: metrics.EvaluationReport
    roc: metrics.RocCurve
    test_idx: np.ndarray


@dataclass
class SweepResult:
    ranking: correlation.CorrelationRanking
    rows: list[SweepRow]
    baselines: list[BaselineResult]


def sweep(prepared: PreparedData, config: RunConfig) -> SweepResult:
    ranking = rank(prepared, config)
    rows, base = [], []
    for p in config.percentages:
        try:
            detector, trace = train_detector(prepared, ranking, p, config)
            report, curve = evaluate(detector, prepared.test)
            rows.append(SweepRow(p, detector, trace, report, curve, prepared.test_idx))
            if config.baselines:
                base += run_baselines(prepared, detector.selection, config)
        except PpidError as err:
            err.stage = f"{getattr(err, 'stage', 'sweep')} at {pct_tag(p)}%"
            raise
    return SweepResult(ranking, rows, base)


# -- output helpers -------------------------------------------------------

def pct_tag(p: float) -> str:
    return format(float(p), "g")


SWEEP_COLUMNS = ("percentage", "DR", "accuracy", "FPR", "disclosure", "AUC")


def sweep_table(result: SweepResult) -> list[list[str]]:
    table = []
    for row in result.rows:
        r = row.report
        r.check_consistency()
        table.append([pct_tag(row.percentage), repr(r.detection_rate), repr(r.accuracy),
                      repr(r.fpr), repr(r.disclosure), repr(r.auc)])
    return table


def comparison_table(result: SweepResult) -> list[list[str]]:
    table = []
    for row in result.rows:
        table.append(["EM mixture", pct_tag(row.percentage), repr(row.report.detection_rate),
                      repr(row.report.fpr), "local"])
    for b in result.baselines:
        table.append([b.technique, pct_tag(b.percentage), repr(b.detection_rate),
                      repr(b.fpr), "local"])
    for technique, dr, fpr in baselines.QUOTED_COMPARISON:
        table.append([technique, "", repr(round(dr / 100, 6)), repr(round(fpr / 100, 6)),
                      "quoted"])
    return table


def write_csv_rows(path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def write_sweep(result: SweepResult, out_dir) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    path = out_dir / "sweep.csv"
    write_csv_rows(path, SWEEP_COLUMNS, sweep_table(result))
    written.append(path)
    path = out_dir / "comparison.csv"
    write_csv_rows(path, ("technique", "percentage", "DR", "FPR", "source"),
                   comparison_table(result))
    written.append(path)
    for row in result.rows:
        path = out_dir / f"roc_p{pct_tag(row.percentage)}.csv"
        metrics.write_roc(row.roc, path)
        written.append(path)
    doc = {
        "rows": [{"percentage": row.percentage, "features": list(row.detector.features),
                  "iterations": row.trace.iterations_run, "converged": row.trace.converged,
                  "final_log_likelihood": row.trace.log_likelihood[-1],
                  **row.report.as_dict()} for row in result.rows],
        "comparison": [dict(zip(("technique", "percentage", "DR", "FPR", "source"), r))
                       for r in comparison_table(result)],
        "test_rows": len(result.rows[0].test_idx) if result.rows else 0,
    }
    path = out_dir / "sweep.json"
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    written.append(path)
    return written


def with_overrides(config: RunConfig, **changes) -> RunConfig:
    return replace(config, **{k: v for k, v in changes.items() if v is not None})
