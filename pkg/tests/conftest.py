import numpy as np
import pytest

_RESULTS = pytest.StashKey[list]()


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion reported in the summary")
    config.stash[_RESULTS] = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        status = "PASS" if rep.passed else ("SKIP" if rep.skipped else "FAIL")
        detail = "; ".join(str(v) for k, v in item.user_properties if k == "detail")
        item.config.stash[_RESULTS].append((mark.args[0], mark.args[1], status, detail))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    rows = config.stash.get(_RESULTS, [])
    if not rows:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, status, detail in sorted(rows):
        terminalreporter.write_line(f"{status} [{number:>2}] {title}" + (f" | {detail}" if detail else ""))


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


@pytest.fixture
def detail(record_property):
    """Attach a measured value to the acceptance summary line."""

    def add(text):
        record_property("detail", text)

    return add
