from pathlib import Path

import pytest

from wfcarbon.trace_model import load_roster

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def fixtures() -> Path:
    return FIXTURES


@pytest.fixture
def roster():
    return load_roster(FIXTURES / "nodes.yaml")


@pytest.fixture
def flat_roster():
    return load_roster(FIXTURES / "single_node.yaml")


# --------------------------------------------------------------- acceptance summary

_CRITERIA: dict[int, dict] = {}
_NODE_CRITERION: dict[str, int] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion n")


def pytest_collection_modifyitems(items):
    for item in items:
        mark = item.get_closest_marker("criterion")
        if mark:
            n, title = mark.args
            _CRITERIA.setdefault(n, {"title": title, "outcomes": []})
            _NODE_CRITERION[item.nodeid] = n


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    n = _NODE_CRITERION.get(report.nodeid)
    if n is not None:
        _CRITERIA[n]["outcomes"].append(report.outcome)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        entry = _CRITERIA[n]
        outcomes = entry["outcomes"]
        if not outcomes:
            status = "NOT RUN"
        elif "failed" in outcomes:
            status = "FAIL"
        elif all(o == "skipped" for o in outcomes):
            status = "SKIP"
        else:
            status = "PASS"
        terminalreporter.write_line(f"criterion {n}: {status:7s} {entry['title']}")
