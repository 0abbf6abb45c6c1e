import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from pbpanel.dgp import simulate_ardl_panel

settings.register_profile(
    "default", deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running Monte Carlo checks")


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def noisy_panel(rng, n=5, T=25, beta=(1.0,), sigma_v=0.5, lengths=None):
    beta = np.atleast_1d(beta)
    k = beta.shape[0]
    return simulate_ardl_panel(
        beta, rng.uniform(0.2, 0.6, n), rng.normal(size=(n, k)), rng.normal(size=n), T, rng,
        sigma_v=sigma_v, lengths=lengths,
    )


@pytest.fixture
def small_panel(rng):
    return noisy_panel(rng)


ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance():
    """Record one PASS/FAIL line per criterion and fail the test when it does not hold."""

    def record(label, ok, detail):
        line = f"{label}: {'PASS' if ok else 'FAIL'} - {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
