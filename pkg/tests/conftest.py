import numpy as np
import pytest

from ppcokrig import McemConfig, run_mcem, toy_levels


@pytest.fixture(scope="session")
def toy_em():
    return run_mcem(toy_levels(), McemConfig(seed=1))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    if mod is not None and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in mod.RESULTS:
            terminalreporter.write_line(line)
