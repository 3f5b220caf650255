"""Reports one PASS/FAIL line per acceptance criterion at the end of the run."""

_results: dict[int, dict] = {}


def pytest_runtest_makereport(item, call):
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    # Record the call phase, plus setup failures (a broken fixture fails the criterion).
    if call.when != "call" and not (call.when == "setup" and call.excinfo is not None):
        return
    n, title = marker.args
    entry = _results.setdefault(n, {"title": title, "passed": 0, "failed": 0})
    entry["failed" if call.excinfo is not None else "passed"] += 1


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_results):
        r = _results[n]
        status = "PASS" if r["failed"] == 0 else "FAIL"
        terminalreporter.write_line(f"{status}  criterion {n:2d}: {r['title']} "
                                    f"({r['passed']} passed, {r['failed']} failed)")
