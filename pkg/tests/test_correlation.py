import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ppid.correlation import (
    LABEL_CORRELATION,
    MEAN_PAIRWISE,
    CorrelationRanking,
    correlation_matrix,
    disclosure_percentage,
    pcc,
    rank_features,
    read_ranking,
    select_quartile,
    write_ranking,
)
from ppid.dataset import ATTACK, NORMAL, LabeledMatrix
from ppid.errors import ConfigError, DataError, UndefinedCorrelationError

from oracles import pcc_exact


def test_pcc_examples():
    assert pcc([1, 2, 3], [2, 4, 6]) == 1.0
    assert pcc([1, 2, 3], [6, 4, 2]) == -1.0
    assert pcc([1, 2, 3], [1, 3, 2]) == pytest.approx(pcc_exact([1, 2, 3], [1, 3, 2]), abs=1e-15)
    assert pcc([1, 2, 3], [1, 3, 2]) == pytest.approx(0.5, abs=1e-15)


def test_pcc_errors():
    with pytest.raises(DataError):
        pcc([1, 2], [1, 2, 3])
    with pytest.raises(DataError):
        pcc([1], [1])
    with pytest.raises(UndefinedCorrelationError):
        pcc([0.1, 0.1, 0.1], [1, 2, 3])
    # spread so small its square underflows is treated as zero variance
    with pytest.raises(UndefinedCorrelationError):
        pcc([0.0, 1.0], [0.0, 5e-288])
    assert pcc([0.0, 1.0], [0.0, 5e-150]) == 1.0


reals = st.floats(-1e3, 1e3).map(lambda v: round(v, 6))
vectors = st.integers(2, 30).flatmap(lambda n: st.tuples(
    st.lists(reals, min_size=n, max_size=n), st.lists(reals, min_size=n, max_size=n)))


@settings(max_examples=200, deadline=None)
@given(vectors)
def test_pcc_matches_oracle_and_is_symmetric(xy):
    x, y = xy
    if len(set(x)) < 2 or len(set(y)) < 2:
        return
    r = pcc(x, y)
    assert -1.0 <= r <= 1.0
    assert r == pcc(y, x)
    assert abs(r - pcc_exact(x, y)) < 1e-10


@settings(max_examples=100, deadline=None)
@given(vectors, st.floats(0.1, 10), st.floats(-100, 100))
def test_pcc_affine_invariance(xy, a, b):
    x, y = xy
    x = np.array(x)
    if np.ptp(x) < 1e-3 or np.ptp(y) < 1e-3:
        return
    r = pcc(x, y)
    assert abs(pcc(a * x + b, y) - r) < 1e-10
    assert abs(pcc(-a * x + b, y) + r) < 1e-10


def test_correlation_matrix_basics(rng):
    v = rng.normal(size=(20, 3))
    v = np.column_stack([v, v[:, 0], np.full(20, 4.0)])
    c = correlation_matrix(LabeledMatrix(v, tuple("abcde"), [0] * 20))
    assert np.array_equal(np.diag(c), np.ones(5))
    assert np.array_equal(c[:4, :4], c[:4, :4].T)
    assert c[0, 3] == pytest.approx(1.0, abs=1e-12)
    assert c[0, 1] == pytest.approx(pcc(v[:, 0], v[:, 1]), abs=1e-12)
    assert np.isnan(c[4, :4]).all() and np.isnan(c[:4, 4]).all()
    with pytest.raises(DataError):
        correlation_matrix(v[:1])


def test_correlation_matrix_matches_oracle(rng):
    for trial in range(20):
        n, d = int(rng.integers(2, 51)), int(rng.integers(1, 11))
        v = rng.normal(size=(n, d)) * rng.uniform(0.1, 100, size=d)
        c = correlation_matrix(v)
        for i in range(d):
            for j in range(d):
                expected = 1.0 if i == j else pcc_exact(v[:, i], v[:, j])
                assert abs(c[i, j] - expected) < 1e-10


def binary(values, labels, names=None):
    names = names or tuple(f"f{i}" for i in range(values.shape[1]))
    return LabeledMatrix(values, names, labels)


def test_label_correlation_ranking(rng):
    labels = [NORMAL, ATTACK] * 10
    enc = np.array([0.0, 1.0] * 10)
    v = np.column_stack([rng.normal(size=20), enc, np.full(20, 3.0), -enc + rng.normal(0, .1, 20)])
    r = rank_features(binary(v, labels, ("noise", "perfect", "const", "neg")), LABEL_CORRELATION)
    assert r.features[0] == "perfect" and r.entries[0][1] == 1.0
    assert r.features[1] == "neg"
    assert r.features[-1] == "const" and r.entries[-1][1] == 0.0
    assert sorted(r.features) == ["const", "neg", "noise", "perfect"]


def test_mean_pairwise_ranking(rng):
    base = rng.normal(size=30)
    noise = rng.normal(size=30)
    v = np.column_stack([base, noise, base])
    r = rank_features(binary(v, [NORMAL] * 30, ("f1", "f3", "f2")), MEAN_PAIRWISE)
    # oracle scores straight from the exact PCC definition
    s12 = abs(pcc_exact(base, base))
    s13 = abs(pcc_exact(base, noise))
    assert r.features == ("f1", "f2", "f3")
    assert r.entries[0][1] == pytest.approx((s12 + s13) / 2, abs=1e-10)
    assert r.entries[2][1] == pytest.approx(s13, abs=1e-10)


def test_ranking_ties_break_by_name():
    v = np.array([[0.0, 0.0], [1.0, 1.0], [0.0, 0.0], [1.0, 1.0]])
    r = rank_features(binary(v, [NORMAL, ATTACK, NORMAL, ATTACK], ("zeta", "alpha")))
    assert r.features == ("alpha", "zeta")


def test_ranking_degenerate_inputs():
    v = np.arange(6, dtype=float).reshape(3, 2)
    with pytest.raises(UndefinedCorrelationError):
        rank_features(binary(v, [ATTACK] * 3))
    with pytest.raises(UndefinedCorrelationError):
        rank_features(binary(np.ones((3, 2)), [ATTACK] * 3), MEAN_PAIRWISE)
    with pytest.raises(ConfigError):
        rank_features(binary(v, [ATTACK, NORMAL, ATTACK]), "mutual_information")
    with pytest.raises(DataError):
        rank_features(binary(v, [1, 2, 3]))


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 12), st.integers(4, 30), st.integers(0, 2**31))
def test_ranking_is_permutation(d, n, seed):
    rng = np.random.default_rng(seed)
    v = rng.normal(size=(n, d))
    labels = [NORMAL, ATTACK] * (n // 2) + [NORMAL] * (n % 2)
    for mode in (LABEL_CORRELATION, MEAN_PAIRWISE):
        if mode == MEAN_PAIRWISE and d == 1:
            continue
        r = rank_features(binary(v, labels), mode)
        assert sorted(r.features) == sorted(f"f{i}" for i in range(d))
        scores = [s for _, s in r.entries]
        assert scores == sorted(scores, reverse=True)


def ranking(n):
    return CorrelationRanking(tuple((f"f{i:03d}", 1.0 - i / n) for i in range(n)), LABEL_CORRELATION)


def test_select_quartile_counts():
    sel = select_quartile(ranking(116), 25)
    assert len(sel.selected) == 29
    assert disclosure_percentage(sel) == 0.25
    assert sel.selected == ranking(116).features[:29]
    assert select_quartile(ranking(116), 50).disclosure == 0.5
    sel = select_quartile(ranking(10), 50)
    assert len(sel.selected) == 5 and sel.disclosure == 0.5
    assert len(select_quartile(ranking(10), 30).selected) == 3  # no float ceil drift
    assert len(select_quartile(ranking(10), 25).selected) == 3  # 2.5 rounds up
    for n in (1, 7, 116):
        full = select_quartile(ranking(n), 100)
        assert set(full.selected) == set(ranking(n).features) and full.disclosure == 1.0
    for bad in (0, -5, 100.5):
        with pytest.raises(ConfigError):
            select_quartile(ranking(10), bad)


def test_ranking_csv_round_trip(tmp_path):
    r = ranking(5)
    write_ranking(r, tmp_path / "r.csv")
    lines = (tmp_path / "r.csv").read_text().splitlines()
    assert lines[0] == "rank,feature,score"
    assert lines[1].startswith("1,f000,")
    assert read_ranking(tmp_path / "r.csv") == r
