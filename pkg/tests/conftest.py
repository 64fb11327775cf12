import os

import pytest
from hypothesis import HealthCheck, settings

from fractal_sl import builtin, eigenvalues
from fractal_sl.asymptotics import IndexCurve

settings.register_profile(
    "default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.register_profile("ci", max_examples=100, deadline=None, derandomize=True)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

# lines appended by test_acceptance, echoed once at the end of the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def cantor_table():
    """First 20 positive eigenvalues of the cantor weight, depth 9 refined at 10."""
    return eigenvalues(builtin("cantor"), "+", 20, 9, 1e-9)


@pytest.fixture(scope="session")
def tilde_curves():
    p = builtin("tilde_P", "1/5")
    return {
        s: IndexCurve.from_report(eigenvalues(p, s, 60, 9, 1e-9, refine=False)) for s in "+-"
    }
