import pytest

_LINES: list[str] = []


@pytest.fixture
def report(request):
    """Record one ``CRITERION n: PASS|FAIL - detail`` line per acceptance test."""
    tr = request.config.pluginmanager.get_plugin("terminalreporter")

    def emit(n, ok, detail):
        line = f"CRITERION {n}: {'PASS' if ok else 'FAIL'} - {detail}"
        _LINES.append(line)
        if tr is not None:
            tr.write_line("")
            tr.write_line(line)

    return emit


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
