from __future__ import annotations

import pytest

from proslm.config import DEFAULT_KB, DEFAULT_STUB, AppConfig, build_runtime
from proslm.llm import StubClient
from proslm.parser import load_kb
from proslm.percepts import FixedClock, PerceptRegistry

DINING_STATEMENT = (
    "UCSC has three dining halls: College Nine/Ten Dining Hall, "
    "Cowell/Stevenson Dining Hall, and Crown/Merrill Dining Hall."
)
LIBRARY_STATEMENT = "UCSC has two libraries: McHenry and Engineering."


@pytest.fixture(scope="session")
def ucsc_kb():
    return load_kb(DEFAULT_KB)


@pytest.fixture
def stub():
    return StubClient.from_fixtures(DEFAULT_STUB)


@pytest.fixture
def weather():
    reg = PerceptRegistry()
    reg.set_static("p_weather", "sunny")
    return reg


@pytest.fixture
def clock():
    return FixedClock(1100, "monday", 1)


@pytest.fixture
def runtime():
    return build_runtime(AppConfig(stub=True, now="1100 monday 1"))


# --- acceptance report -----------------------------------------------------

_criteria: dict[int, tuple[str, bool]] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or report.when not in ("setup", "call"):
        return
    number, title = marker.args
    ok = report.passed and _criteria.get(number, (title, True))[1]
    if report.when == "call" or not report.passed:
        _criteria[number] = (title, ok)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        title, ok = _criteria[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {title}")
