import os
import sys

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

FIXTURES = os.path.join(os.path.dirname(__file__), "fixtures")
SIM = os.path.join(FIXTURES, "sphere_sim.py")

# criterion number -> (title, detail) filled in by tests/test_acceptance.py
ACCEPTANCE: dict = {}


@pytest.fixture
def sim_command():
    def make(*args):
        return (sys.executable, SIM) + tuple(args)
    return make


@pytest.fixture
def acceptance():
    def record(number, title, detail):
        ACCEPTANCE[number] = (title, detail)
    return record


def pytest_terminal_summary(terminalreporter):
    outcomes = {}
    for key in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(key, []):
            name = rep.nodeid.rsplit("::", 1)[-1]
            if "test_acceptance.py" in rep.nodeid and name.startswith("test_criterion_") and rep.when == "call":
                outcomes[int(name.split("_")[2])] = key == "passed"
    if not outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(outcomes):
        title, detail = ACCEPTANCE.get(n, ("", "no measurement recorded"))
        tag = "PASS" if outcomes[n] else "FAIL"
        terminalreporter.write_line(f"[{tag}] criterion {n}: {title} | {detail}")
