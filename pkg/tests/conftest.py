import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

ACCEPTANCE = {}


@pytest.fixture
def record():
    """record(number, passed, summary) files one acceptance line for the terminal summary."""

    def _record(number, passed, summary):
        ACCEPTANCE[number] = (bool(passed), summary)
        return passed

    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        passed, summary = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {summary}")
