import pytest

_criteria: dict[int, list[tuple[str, str]]] = {}


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    n = getattr(report, "_criterion", None)
    if n is not None:
        _criteria.setdefault(n, []).append((report.nodeid, report.outcome))


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    marker = item.get_closest_marker("criterion")
    if marker is not None:
        outcome.get_result()._criterion = marker.args[0]


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_criteria):
        results = _criteria[n]
        failed = [nodeid for nodeid, outcome in results if outcome != "passed"]
        status = "PASS" if not failed else "FAIL"
        terminalreporter.write_line(f"criterion {n}: {status} ({len(results) - len(failed)}/{len(results)} checks)")
        for nodeid in failed:
            terminalreporter.write_line(f"    failed: {nodeid}")
