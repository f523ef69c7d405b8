import math
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from robsparse.core import Dataset  # noqa: E402


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


def make_dataset(rng, n=40, p=6, beta=None, outliers=(), magnitude=8.0, sigma=1.0):
    X_raw = rng.standard_normal((n, p))
    data = Dataset.from_raw(np.zeros(n), X_raw)
    b = np.zeros(p) if beta is None else np.asarray(beta, float)
    y = data.X @ b + sigma * rng.standard_normal(n)
    for i in outliers:
        y[i] += magnitude
    return Dataset(y=y, X=data.X, column_scales=data.column_scales)


@pytest.fixture
def small_dataset(rng):
    return make_dataset(rng, n=40, p=6, beta=[1.5, -1.0, 0, 0, 0.8, 0], outliers=(3, 17))


def sqrt_n(ds):
    return math.sqrt(ds.n)


def pytest_terminal_summary(terminalreporter):
    import acceptance_log

    if acceptance_log.LINES:
        terminalreporter.section("acceptance criteria")
        for number in sorted(acceptance_log.LINES):
            terminalreporter.write_line(acceptance_log.LINES[number])
