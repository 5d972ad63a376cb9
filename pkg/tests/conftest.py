import time

import pytest

_RESULTS = {}


class Criterion:
    """Collects the outcome of one acceptance criterion for the summary table."""

    def __init__(self, number, title):
        self.number = number
        self.title = title
        self.details = []
        self.passed = True
        self._start = time.perf_counter()

    def check(self, ok, detail):
        self.details.append(detail)
        self.passed = self.passed and bool(ok)
        return ok

    def within(self, limit_s):
        elapsed = time.perf_counter() - self._start
        self.check(elapsed < limit_s, f"runtime {elapsed:.2f}s < {limit_s}s")


@pytest.fixture
def criterion(request):
    marker = request.node.get_closest_marker("acceptance")
    number, title = marker.args
    c = Criterion(number, title)
    yield c
    report = getattr(request.node, "report_call", None)
    if report is not None and report.failed and c.passed:
        c.passed = False
        c.details.append("raised before completing")
    _RESULTS[number] = c


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    if report.when == "call":
        item.report_call = report


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_RESULTS):
        c = _RESULTS[number]
        status = "PASS" if c.passed else "FAIL"
        terminalreporter.write_line(f"[{status}] {number:2d}. {c.title}: " + "; ".join(c.details))
