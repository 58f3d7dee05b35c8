import pytest

from specfactor.numtheory import sieve

_ACCEPTANCE = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): exit criterion of the build")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    number, title = marker.args
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        # a criterion split over several tests passes only if all of them do
        _, earlier = _ACCEPTANCE.get(number, (title, "passed"))
        _ACCEPTANCE[number] = (title, report.outcome if earlier == "passed" else earlier)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        title, outcome = _ACCEPTANCE[number]
        status = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"[{status}] criterion {number:>2}: {title}")


@pytest.fixture(scope="session")
def table256():
    return sieve(256)


@pytest.fixture(scope="session")
def table2048():
    return sieve(2048)
