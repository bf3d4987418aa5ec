from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ppid.dataset import ATTACK, NORMAL
from ppid.errors import DataError, UndefinedMetricError
from ppid.metrics import (
    ConfusionMatrix,
    EvaluationReport,
    accuracy,
    confusion,
    detection_rate,
    false_positive_rate,
    parse_report_text,
    roc_curve,
    write_roc,
)

from oracles import auc_pairs

A, N = ATTACK, NORMAL


def test_confusion_examples():
    truth = [A, A, A, N, N]
    assert confusion(truth, truth) == ConfusionMatrix(3, 2, 0, 0)
    flipped = [N if t == A else A for t in truth]
    assert confusion(flipped, truth) == ConfusionMatrix(0, 0, 2, 3)
    assert confusion([A] * 4, [N] * 4) == ConfusionMatrix(0, 0, 4, 0)
    with pytest.raises(DataError):
        confusion([A], [A, N])
    with pytest.raises(DataError):
        confusion([], [])
    with pytest.raises(DataError):
        confusion([A], [7])


def test_rates_examples():
    cm = ConfusionMatrix(tp=5, tn=3, fp=1, fn=1)
    assert accuracy(cm) == 0.8
    assert detection_rate(cm) == 5 / 6
    assert false_positive_rate(cm) == 0.25
    perfect = ConfusionMatrix(4, 4, 0, 0)
    assert (accuracy(perfect), detection_rate(perfect), false_positive_rate(perfect)) == (1, 1, 0)


def test_zero_denominators_raise():
    with pytest.raises(UndefinedMetricError):
        detection_rate(ConfusionMatrix(0, 3, 1, 0))
    with pytest.raises(UndefinedMetricError):
        false_positive_rate(ConfusionMatrix(3, 0, 0, 1))
    with pytest.raises(UndefinedMetricError):
        accuracy(ConfusionMatrix(0, 0, 0, 0))


@given(st.integers(1, 50), st.integers(0, 50), st.integers(0, 50), st.integers(1, 50),
       st.integers(1, 20))
def test_rates_are_scale_free(tp, tn, fp, fn, k):
    fp = fp + (tn == 0)
    cm = ConfusionMatrix(tp, tn, fp, fn)
    big = ConfusionMatrix(k * tp, k * tn, k * fp, k * fn)
    assert accuracy(cm) == accuracy(big)
    assert detection_rate(cm) == detection_rate(big)
    assert false_positive_rate(cm) == false_positive_rate(big)
    assert accuracy(cm) == float(Fraction(tp + tn, tp + tn + fp + fn))


def test_roc_examples():
    perfect = roc_curve([0.9, 0.8, 0.2, 0.1], [A, A, N, N])
    assert perfect.auc == 1.0
    flat = roc_curve([0.5] * 4, [A, N, A, N])
    assert flat.points == [(0.0, 0.0), (1.0, 1.0)]
    assert flat.auc == 0.5
    small = roc_curve([0.9, 0.8, 0.3], [A, N, A])
    assert small.auc == float(auc_pairs([0.9, 0.8, 0.3], [True, False, True])) == 0.5
    assert small.points == [(0, 0), (0, 0.5), (1, 0.5), (1, 1)]
    with pytest.raises(UndefinedMetricError):
        roc_curve([0.1, 0.2], [A, A])


scored = st.integers(2, 20).flatmap(lambda n: st.tuples(
    st.lists(st.sampled_from([0.0, 0.1, 0.25, 0.5, 0.7, 0.9, 1.0]) | st.floats(0, 1).map(lambda v: round(v, 3)),
             min_size=n, max_size=n),
    st.lists(st.booleans(), min_size=n, max_size=n)))


@settings(max_examples=300, deadline=None)
@given(scored)
def test_auc_matches_pair_count(data):
    scores, positive = data
    if all(positive) or not any(positive):
        return
    truth = [A if p else N for p in positive]
    curve = roc_curve(scores, truth)
    assert abs(curve.auc - float(auc_pairs(scores, positive))) < 1e-12
    assert curve.points[0] == (0.0, 0.0) and curve.points[-1] == (1.0, 1.0)
    assert all(a <= b for a, b in zip(curve.fpr, curve.fpr[1:]))
    # strictly increasing transforms leave the curve unchanged
    warped = roc_curve([s ** 3 * 7 - 2 for s in scores], truth)
    assert warped.points == curve.points and warped.auc == curve.auc


def test_report_serialization(tmp_path):
    cm = ConfusionMatrix(5, 3, 1, 1)
    rep = EvaluationReport.from_confusion(cm, 0.25, 25.0, 0.75, 29)
    kv = parse_report_text(rep.to_text())
    assert kv["source"] == "local"
    assert int(kv["TP"]) == 5 and float(kv["disclosure"]) == 0.25
    assert float(kv["detection_rate"]) == detection_rate(cm)
    assert '"auc": 0.75' in rep.to_json()
    bad = EvaluationReport(cm, 0.9, rep.detection_rate, rep.fpr, 0.25, 25.0, 0.75, 29)
    with pytest.raises(DataError):
        bad.to_text()
    curve = roc_curve([0.9, 0.8, 0.3], [A, N, A])
    write_roc(curve, tmp_path / "roc.csv")
    lines = (tmp_path / "roc.csv").read_text().splitlines()
    assert lines[0] == "threshold,fpr,tpr" and lines[1] == "inf,0.0,0.0"
    assert lines[-1] == "0.3,1.0,1.0"
