import numpy as np
import pytest

from acpl.data import SyntheticSpec, generate_synthetic
from acpl.trainer import AcplConfig

SMALL_MEANS = [[2.0, 0.0, 0.0, 1.0], [0.0, 2.0, 0.0, 1.0], [0.0, 0.0, 2.0, 1.0]]


@pytest.fixture(scope="session")
def small_data():
    train = generate_synthetic(SyntheticSpec([90, 40, 20], SMALL_MEANS), 11)
    test = generate_synthetic(SyntheticSpec([30, 30, 30], SMALL_MEANS), 12)
    return train, test


@pytest.fixture
def fast_cfg():
    return AcplConfig().replace(k=5, stages=3, warmup_epochs=20, stage_epochs=5, hidden=8)


@pytest.fixture
def rng():
    return np.random.default_rng(0)


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


_CRITERIA = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    number, title = mark.args
    failed = report.failed
    prev = _CRITERIA.get(number)
    if report.when == "call" or failed:
        detail = dict(item.user_properties).get("detail", "")
        if prev is None or not prev[1]:
            _CRITERIA[number] = (title, not failed, detail)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        title, ok, detail = _CRITERIA[number]
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:2d}: {title}"
        terminalreporter.write_line(line + (f"  ({detail})" if detail else ""))
