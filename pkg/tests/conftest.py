from pathlib import Path

import pytest

from wasmstack import programs
from wasmstack.assembler import assemble

DATA = Path(__file__).parent / "data"

_acceptance = {}


@pytest.fixture(scope="session")
def calc_source():
    return programs.source("calc.asm")


@pytest.fixture(scope="session")
def golden_hexdump():
    return (DATA / "calc.hex").read_text()


@pytest.fixture(scope="session")
def calc_image(calc_source):
    return assemble(calc_source)


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    if report.when == "call" or report.outcome != "passed":
        _acceptance.setdefault(report.nodeid, report.outcome)


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for nodeid, outcome in _acceptance.items():
        name = nodeid.split("::")[-1]
        verdict = "PASS" if outcome == "passed" else outcome.upper()
        terminalreporter.write_line(f"{verdict:8} {name}")
