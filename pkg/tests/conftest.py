import numpy as np
import pytest

from ppid.dataset import ATTACK, NORMAL, LabeledMatrix, SynthClass, synth_generate

_criteria = {}


def pytest_collection_modifyitems(items):
    for item in items:
        if item.module.__name__.endswith("test_acceptance"):
            doc = (item.function.__doc__ or item.name).strip().splitlines()[0]
            _criteria[item.nodeid] = [doc, "NOT RUN"]


def pytest_runtest_logreport(report):
    if report.nodeid not in _criteria:
        return
    entry = _criteria[report.nodeid]
    if report.skipped:
        entry[1] = "SKIP"
    elif report.failed:
        entry[1] = "FAIL"
    elif report.when == "call" and entry[1] == "NOT RUN":
        entry[1] = "PASS"


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for doc, outcome in _criteria.values():
        terminalreporter.write_line(f"{outcome:<5} {doc}")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def blobs(n_per_class=200, dim=4, shift=6.0, informative=None, seed=0):
    """Two Gaussian classes differing in the first ``informative`` features."""
    informative = dim if informative is None else informative
    attack_mean = [shift] * informative + [0.0] * (dim - informative)
    return synth_generate(
        [SynthClass(NORMAL, n_per_class, [0.0] * dim, [1.0] * dim),
         SynthClass(ATTACK, n_per_class, attack_mean, [1.0] * dim)],
        seed,
    )


@pytest.fixture
def toy_matrix():
    return LabeledMatrix(np.array([[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]]), ("a", "b"),
                         [NORMAL, ATTACK, ATTACK])
