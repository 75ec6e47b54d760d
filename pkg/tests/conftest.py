import numpy as np
import pytest

from robustlab.data import Dataset
from robustlab.tensornet import Architecture, init_params


@pytest.fixture
def small_net():
    arch = Architecture((6, 5, 4, 3))
    return init_params(arch, "glorot_uniform", seed=1)


@pytest.fixture
def linear_net():
    arch = Architecture((8, 3))
    return init_params(arch, "glorot_uniform", seed=2)


@pytest.fixture
def toy_data():
    """Three well separated blobs in [0, 1]^6."""
    rng = np.random.default_rng(0)
    centres = np.array([[0.2] * 6, [0.8] * 6, [0.2, 0.8] * 3])
    y = rng.integers(0, 3, size=120)
    x = np.clip(centres[y] + 0.05 * rng.standard_normal((120, 6)), 0, 1)
    return Dataset(x, y)


_VERDICTS = []


@pytest.fixture
def verdict():
    """Print and collect one PASS/FAIL line per acceptance criterion."""
    def record(n, ok, detail):
        line = f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        print(line)
        _VERDICTS.append(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_VERDICTS):
            terminalreporter.write_line(line)
