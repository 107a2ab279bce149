from pathlib import Path

import pytest

from patternforge.pattern import parse_pattern

FIXTURES = Path(__file__).parent / "fixtures"


def load_fixture(name: str):
    return parse_pattern((FIXTURES / f"{name}.json").read_text())


def fixture_names():
    return sorted(p.stem for p in FIXTURES.glob("*.json"))


@pytest.fixture(params=fixture_names())
def fixture_pattern(request):
    return load_fixture(request.param)


# -- acceptance report --------------------------------------------------------

_criteria: dict[int, tuple[str, bool]] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("acceptance")
    if mark is None or report.when not in ("setup", "call"):
        return
    number, title = mark.args
    if report.when == "setup" and report.passed:
        return
    _, ok = _criteria.get(number, (title, True))
    _criteria[number] = (title, ok and report.passed)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        title, ok = _criteria[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {title}")
