import numpy as np
import pytest

from divlam import InstanceParams, build_instance

_RESULTS = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or rep.when != "call":
        return
    num, title = mark.args
    _RESULTS.setdefault(num, []).append((title, rep.passed))


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_RESULTS):
        for title, ok in _RESULTS[num]:
            terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  criterion {num:>2}: {title}")


@pytest.fixture(scope="session")
def canonical():
    return build_instance(InstanceParams((0.5, 0.5, 0.5)))
