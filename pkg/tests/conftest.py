import pytest
from hypothesis import HealthCheck, settings

from dampedcasimir.params import SystemParams, derive

settings.register_profile(
    "default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def fig_params():
    """eps*omega0/K = 0.85, K/gamma = 10, hbar K/k_B T = 3."""
    return derive(SystemParams.from_ratios(0.85, 10.0, 3.0))


@pytest.fixture(scope="session")
def fig_params_t0():
    return derive(SystemParams.from_ratios(0.85, 10.0, 0.0))


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
