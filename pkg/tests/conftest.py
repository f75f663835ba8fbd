"""Shared test plumbing: acceptance-criterion reporting.

Acceptance tests record one (passed, message) entry per criterion via the
``criterion`` fixture; the terminal summary prints one pass/fail line each
so the outcome is readable without digging through the pytest output.
"""

import pytest

ACCEPTANCE_RESULTS = {}


@pytest.fixture
def criterion():
    def record(number, passed, message):
        ACCEPTANCE_RESULTS[number] = (bool(passed), message)
        return passed
    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for number in sorted(ACCEPTANCE_RESULTS):
        passed, message = ACCEPTANCE_RESULTS[number]
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"[{status}] criterion {number}: {message}")
