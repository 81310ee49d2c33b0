import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from fuzzypool.data import load_mnist  # noqa: E402

_CRITERIA = []


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion checked by this test")


@pytest.fixture(scope="session")
def mnist_train():
    try:
        return load_mnist(train=True)
    except FileNotFoundError as exc:
        pytest.skip(f"MNIST not available: {exc}")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        details = "; ".join(str(v) for k, v in item.user_properties if k == "detail")
        status = "PASS" if report.passed else "FAIL"
        _CRITERIA.append((marker.args[0], status, marker.args[1], details))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for number, status, title, details in sorted(_CRITERIA):
        line = f"criterion {number} {status}: {title}"
        terminalreporter.write_line(line + (f" | {details}" if details else ""))
