import sys
from importlib import resources
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

DATA = resources.files("hierfdr") / "data"


@pytest.fixture
def data_dir() -> Path:
    return Path(str(DATA))


@pytest.fixture
def goschke_text(data_dir) -> str:
    return (data_dir / "goschke_tree.json").read_text()


@pytest.fixture
def rpp_text(data_dir) -> str:
    return (data_dir / "rpp_table1_fixture.csv").read_text()


# Acceptance criteria report one PASS/FAIL line each at the end of the run.
_CRITERIA: list[tuple[str, str]] = []


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(name): acceptance criterion reported by name")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _CRITERIA.append(("PASS" if report.passed else "FAIL", marker.args[0]))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for status, name in _CRITERIA:
        terminalreporter.write_line(f"{status}: {name}")
