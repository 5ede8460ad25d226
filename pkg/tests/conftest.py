import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

ACCEPTANCE_LINES = []


def record_acceptance(number, passed, detail):
    line = f"criterion {number}: {'PASS' if passed else 'FAIL'} - {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


def random_spd(rng, scale=1.0, dim=2):
    A = rng.normal(size=(dim, dim))
    return scale * (A @ A.T + 0.5 * np.eye(dim))


def random_state(rng):
    return np.array([rng.uniform(-100, 100), rng.uniform(50, 400), rng.uniform(0.5, 10),
                     rng.uniform(-math.pi, math.pi), rng.uniform(-0.2, 0.2)])


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
