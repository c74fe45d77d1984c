import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "gre", deadline=None, max_examples=50, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("gre")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    import verdicts

    if verdicts.CHECKS:
        terminalreporter.section("acceptance criteria")
        for line in verdicts.lines():
            terminalreporter.write_line(line)
