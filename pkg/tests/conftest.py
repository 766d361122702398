import numpy as np
import pytest

from netorch.registry import default_registry
from netorch.simenv import generate_scenario, scenario_to_power_problem


@pytest.fixture
def registry():
    return default_registry()


@pytest.fixture(scope="session")
def power_problems():
    """The L=4, K=5, M=96 scenario family, seeds 0-9."""
    return [scenario_to_power_problem(generate_scenario(4, 5, 96, seed), 1000.0) for seed in range(10)]


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# acceptance criteria report their verdicts here; printed once at the end of the run
CRITERIA: dict[int, tuple[str, bool]] = {}


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(CRITERIA):
        title, ok = CRITERIA[n]
        terminalreporter.write_line(f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {title}")
