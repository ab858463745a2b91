import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from multibath import ou_exact
from multibath.potential import Quadratic

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", deadline=None, max_examples=200)
settings.load_profile(os.getenv("HYPOTHESIS_PROFILE", "default"))

# reference quadratic used throughout: a=2, b=1, c=0.5, beta1=1, beta2=2
P0 = dict(a=2.0, b=1.0, c=0.5)
BETA1, BETA2 = 1.0, 2.0


@pytest.fixture
def p0():
    return Quadratic(**P0)


@pytest.fixture
def p0_system():
    def make(lam=100.0, beta1=BETA1, beta2=BETA2):
        return ou_exact.build(Quadratic(**P0).params, beta1, beta2, lam)
    return make


@pytest.fixture
def sigma_p0():
    return np.array([[15 / 28, -1 / 7], [-1 / 7, 4 / 7]])


# one PASS/FAIL line per acceptance criterion, repeated in the terminal summary
ACCEPTANCE_LINES = []


@pytest.fixture
def criterion():
    def report(name, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'} {name}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok, line
    return report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
