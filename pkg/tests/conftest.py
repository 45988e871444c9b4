from pathlib import Path

import pytest

FIXTURES = Path(__file__).parent / "fixtures"

_acceptance = {}


@pytest.fixture
def fixtures():
    return FIXTURES


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    if report.when == "call" or report.outcome in ("failed", "skipped"):
        name = report.nodeid.split("::")[-1]
        prev = _acceptance.get(name)
        if prev in ("FAIL",):
            return
        _acceptance[name] = {"passed": "PASS", "failed": "FAIL", "skipped": "SKIP"}[report.outcome]


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome in _acceptance.items():
        terminalreporter.write_line(f"{outcome}  {name}")
