import os

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", max_examples=100, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", max_examples=400, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

ACCEPTANCE = []


@pytest.fixture
def report():
    """Record an acceptance verdict; the summary prints every line at the end of the run."""

    def _report(n, ok, detail):
        ACCEPTANCE.append((n, bool(ok), detail))
        print(f"ACCEPTANCE {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
        return ok

    return _report


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n, ok, detail in sorted(ACCEPTANCE, key=lambda r: r[0]):
        terminalreporter.write_line(f"ACCEPTANCE {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
