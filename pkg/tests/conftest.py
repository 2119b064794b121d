"""Collects acceptance outcomes and prints one verdict line per criterion."""

import pytest

_verdicts: dict[int, dict] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion a test belongs to")


def pytest_runtest_logreport(report):
    marker = getattr(report, "criterion", None)
    if marker is None:
        return
    number, title = marker
    entry = _verdicts.setdefault(number, {"title": title, "failed": [], "ran": 0, "skipped": 0})
    if report.when == "call" or (report.when == "setup" and not report.passed):
        if report.skipped:
            entry["skipped"] += 1
        else:
            entry["ran"] += 1
            if report.failed:
                entry["failed"].append(report.nodeid.split("::")[-1])


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    marker = item.get_closest_marker("criterion")
    if marker is not None:
        outcome.get_result().criterion = marker.args


def pytest_terminal_summary(terminalreporter):
    if not _verdicts:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_verdicts):
        v = _verdicts[number]
        if v["ran"] == 0:
            status, note = "SKIP", ""
        elif v["failed"]:
            status, note = "FAIL", f"  ({', '.join(v['failed'])})"
        else:
            status, note = "PASS", ""
        extra = f" [{v['skipped']} skipped]" if v["skipped"] else ""
        terminalreporter.write_line(f"criterion {number}: {status}  {v['title']}{note}{extra}")
