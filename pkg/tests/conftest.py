import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from adabb.problems import QuadraticProblem

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def identity2():
    """f(x) = ||x||^2 / 2 in two dimensions."""
    return QuadraticProblem(np.ones(2), np.zeros(2))


@pytest.fixture
def e1():
    return np.array([1.0, 0.0])


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for n in sorted(lines):
            terminalreporter.write_line(lines[n])
