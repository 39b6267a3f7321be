"""Collects acceptance-criterion outcomes and prints one line per criterion."""
import pytest

_RESULTS: dict[int, tuple[str, str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, name): acceptance criterion id")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or report.when != "call":
        return
    number, name = marker.args
    props = dict(report.user_properties)
    if report.passed:
        status = props.get("status", "PASS")
    else:
        status = "FAIL"
    _RESULTS[number] = (name, status, props.get("detail", ""))


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for number in sorted(_RESULTS):
        name, status, detail = _RESULTS[number]
        tr.write_line(f"criterion {number:>2} {status:<4} {name}: {detail}")
