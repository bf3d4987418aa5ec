"""``ppid`` command line: rank, train, evaluate, sweep, roc, synth."""

from __future__ import annotations

import argparse
import configparser
import logging
import sys
from pathlib import Path

from . import correlation, metrics, pipeline
from .dataset import SynthClass, synth_generate, write_csv
from .detection import load_detector, save_detector
from .errors import ConfigError, PpidError

log = logging.getLogger("ppid")


def _pipeline_config(args) -> pipeline.RunConfig:
    percentages = None
    if getattr(args, "percentages", None):
        percentages = pipeline._floats(args.percentages)
    return pipeline.load_config(
        args.config,
        seed=args.seed,
        out=Path(args.out) if args.out else None,
        dataset=Path(args.dataset) if getattr(args, "dataset", None) else None,
        percentages=percentages,
        ranking_mode=getattr(args, "mode", None),
    )


def cmd_rank(args) -> int:
    config = _pipeline_config(args)
    prepared = pipeline.prepare(config)
    ranking = pipeline.rank(prepared, config)
    config.out.mkdir(parents=True, exist_ok=True)
    path = config.out / "ranking.csv"
    correlation.write_ranking(ranking, path)
    print(f"ranked {len(ranking)} features ({ranking.mode}) -> {path}")
    for i, (name, score) in enumerate(ranking.entries[:10], start=1):
        print(f"{i:>4}  {score:.6f}  {name}")
    return 0


def _percentage(args, config) -> float:
    p = args.percentage if args.percentage is not None else config.percentages[-1]
    if not 0 < p <= 100:
        raise ConfigError(f"feature percentage must lie in (0, 100], got {p}")
    return p


def cmd_train(args) -> int:
    config = _pipeline_config(args)
    p = _percentage(args, config)
    prepared = pipeline.prepare(config)
    ranking = pipeline.rank(prepared, config)
    detector, trace = pipeline.train_detector(prepared, ranking, p, config)
    config.out.mkdir(parents=True, exist_ok=True)
    path = config.out / f"detector_p{pipeline.pct_tag(p)}.txt"
    save_detector(detector, path)
    print(f"features: {len(detector.features)} of {detector.selection.total} "
          f"(disclosure {detector.selection.disclosure:.4f})")
    print(f"iterations: {trace.iterations_run}  converged: {str(trace.converged).lower()}  "
          f"final log-likelihood: {trace.log_likelihood[-1]!r}")
    print(f"clusters: {', '.join(detector.cluster_map.labels)}")
    print(f"detector -> {path}")
    return 0


def _write_report(report, curve, out: Path, stem: str) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / f"{stem}.txt").write_text(report.to_text(), encoding="utf-8")
    (out / f"{stem}.json").write_text(report.to_json(), encoding="utf-8")
    metrics.write_roc(curve, out / f"{stem}_roc.csv")


def _print_report(report) -> None:
    cm = report.confusion
    print(f"TP={cm.tp} TN={cm.tn} FP={cm.fp} FN={cm.fn}")
    print(f"DR={report.detection_rate:.4f} accuracy={report.accuracy:.4f} "
          f"FPR={report.fpr:.4f} AUC={report.auc:.4f} disclosure={report.disclosure:.4f}")


def cmd_evaluate(args) -> int:
    config = _pipeline_config(args)
    detector = load_detector(args.detector)
    prepared = pipeline.prepare(config)
    rows = prepared.data if args.all_rows else prepared.test
    report, curve = pipeline.evaluate(detector, rows)
    stem = f"report_p{pipeline.pct_tag(detector.selection.percentage)}"
    _write_report(report, curve, config.out, stem)
    _print_report(report)
    print(f"report -> {config.out / stem}.txt")
    return 0


def cmd_roc(args) -> int:
    config = _pipeline_config(args)
    prepared = pipeline.prepare(config)
    ranking = pipeline.rank(prepared, config)
    config.out.mkdir(parents=True, exist_ok=True)
    for p in config.percentages:
        detector, _ = pipeline.train_detector(prepared, ranking, p, config)
        _, curve = pipeline.evaluate(detector, prepared.test)
        path = config.out / f"roc_p{pipeline.pct_tag(p)}.csv"
        metrics.write_roc(curve, path)
        print(f"{pipeline.pct_tag(p):>6}%  AUC={curve.auc:.4f}  -> {path}")
    return 0


def cmd_sweep(args) -> int:
    config = _pipeline_config(args)
    if not config.baselines or args.no_baselines:
        config = pipeline.with_overrides(config, baselines=False)
    prepared = pipeline.prepare(config)
    result = pipeline.sweep(prepared, config)
    pipeline.write_sweep(result, config.out)
    print(",".join(pipeline.SWEEP_COLUMNS))
    for row in result.rows:
        r = row.report
        print(f"{pipeline.pct_tag(row.percentage)},{r.detection_rate:.4f},{r.accuracy:.4f},"
              f"{r.fpr:.4f},{r.disclosure:.4f},{r.auc:.4f}")
    print("\ntechnique,percentage,DR,FPR,source")
    for line in pipeline.comparison_table(result):
        print(",".join(line))
    print(f"\nresults -> {config.out}")
    return 0


def read_synth_spec(path) -> list[SynthClass]:
    """One INI section per class: ``count``, ``mean`` and ``std`` lists."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"synthetic spec not found: {path}")
    parser = configparser.ConfigParser()
    try:
        parser.read(path, encoding="utf-8")
    except configparser.Error as err:
        raise ConfigError(f"{path}: {err}") from None
    classes = []
    for section in parser.sections():
        sec = parser[section]
        for key in ("count", "mean", "std"):
            if key not in sec:
                raise ConfigError(f"{path}: class [{section}] is missing {key!r}")
        try:
            count = sec.getint("count")
        except ValueError:
            raise ConfigError(f"{path}: class [{section}] count is not an integer") from None
        classes.append(SynthClass(section, count, pipeline._floats(sec["mean"]),
                                  pipeline._floats(sec["std"])))
    if not classes:
        raise ConfigError(f"{path}: no class sections")
    return classes


def cmd_synth(args) -> int:
    seed = args.seed
    if seed is None and args.config:
        seed = pipeline.read_config_file(args.config).get("seed")
    if seed is None:
        raise ConfigError("a seed is required (--seed)")
    classes = read_synth_spec(args.spec)
    matrix = synth_generate(classes, seed)
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    path = out / args.file
    write_csv(matrix, path)
    print(f"{matrix.n_rows} rows x {matrix.n_features} features -> {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ppid", description="Correlation-ranked EM-mixture intrusion detection.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, dataset=True):
        p.add_argument("--config", help="INI run configuration")
        p.add_argument("--seed", type=int, help="overrides [run] seed")
        p.add_argument("--out", help="output directory, overrides [run] out")
        if dataset:
            p.add_argument("--dataset", help="CSV path, overrides [data] path")
            p.add_argument("--mode", choices=correlation.RANKING_MODES,
                           help="ranking mode, overrides [ranking] mode")

    p = sub.add_parser("rank", help="write the correlation ranking of all features")
    common(p)
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("train", help="fit and save a detector at one feature percentage")
    common(p)
    p.add_argument("--percentage", type=float,
                   help="feature percentage (default: last configured percentage)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="evaluate a saved detector on the test split")
    common(p)
    p.add_argument("--detector", required=True, help="detector file written by train")
    p.add_argument("--all-rows", action="store_true", help="score every row, not just the test split")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep", help="train and evaluate at every configured percentage")
    common(p)
    p.add_argument("--percentages", help="comma-separated list, overrides [ranking] percentages")
    p.add_argument("--no-baselines", action="store_true", help="skip k-NN / Naive Bayes")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("roc", help="write ROC curves for every configured percentage")
    common(p)
    p.add_argument("--percentages", help="comma-separated list, overrides [ranking] percentages")
    p.set_defaults(func=cmd_roc)

    p = sub.add_parser("synth", help="generate a synthetic Gaussian dataset")
    common(p, dataset=False)
    p.add_argument("--spec", required=True, help="INI file with one section per class")
    p.add_argument("--file", default="synthetic.csv", help="output file name inside --out")
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except PpidError as err:
        where = getattr(err, "stage", None)
        prefix = f"[{where}] " if where else ""
        print(f"error: {prefix}{err}", file=sys.stderr)
        return err.exit_code


if __name__ == "__main__":
    sys.exit(main())
