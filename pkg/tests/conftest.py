import sys

import numpy as np
import pytest

from censnb.survival import SurvivalDataset


def make_dataset(triples):
    time = [t for t, _, *_ in triples]
    event = [d for _, d, *_ in triples]
    X = [list(rest) for _, _, *rest in triples]
    return SurvivalDataset(time, event, np.array(X, dtype=float).reshape(len(triples), -1))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_censored(rng, n, p=1):
    time = np.round(rng.exponential(2.0, size=n), 1) + 0.1
    event = rng.random(n) < 0.6
    event[0] = True
    X = rng.normal(size=(n, p))
    return SurvivalDataset(time, event, X)


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
