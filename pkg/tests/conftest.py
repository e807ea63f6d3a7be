import numpy as np
import pytest

from langevin_bias.targets import make_gaussian_mixture, make_standard_normal


@pytest.fixture(scope="session")
def normal():
    return make_standard_normal()


@pytest.fixture(scope="session")
def mixture():
    return make_gaussian_mixture()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        terminalreporter.write_line(results[n])
