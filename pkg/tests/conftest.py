import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from reflasm import files  # noqa: E402

CORPUS = Path(__file__).resolve().parent.parent / "corpus"

_acceptance: dict = {}


@pytest.fixture
def corpus() -> Path:
    return CORPUS


@pytest.fixture
def fig1_state():
    return files.load_state(CORPUS / "fig1.state.json")


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _acceptance[name] = report.outcome


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_acceptance):
        verdict = "PASS" if _acceptance[name] == "passed" else "FAIL"
        terminalreporter.write_line(f"{verdict}  {name}")
