"""Collects acceptance-criterion outcomes and prints one line per criterion."""

import pytest

_RESULTS: dict[int, tuple[str, str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): numbered acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    number, title = marker.args
    detail = "; ".join(str(v) for k, v in item.user_properties if k == "detail")
    if rep.when == "setup" and rep.skipped:
        _RESULTS[number] = (title, "SKIP", str(rep.longrepr[-1]) if isinstance(rep.longrepr, tuple) else "")
    elif rep.when == "call":
        if rep.skipped:
            reason = rep.longrepr[-1] if isinstance(rep.longrepr, tuple) else ""
            _RESULTS[number] = (title, "SKIP", str(reason))
        else:
            _RESULTS[number] = (title, "PASS" if rep.passed else "FAIL", detail)
    elif rep.failed:
        _RESULTS[number] = (title, "FAIL", f"{rep.when} error")


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_RESULTS):
        title, status, detail = _RESULTS[number]
        line = f"criterion {number} [{title}]: {status}"
        if detail:
            line += f" ({detail})"
        terminalreporter.write_line(line)
