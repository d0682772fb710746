import pytest

_LINES = {}


@pytest.fixture
def report():
    """Record one acceptance line: ``report(index, title, passed, detail)``."""

    def _rec(index, title, passed, detail=""):
        line = f"[{'PASS' if passed else 'FAIL'}] criterion {index:2d}: {title} ({detail})"
        _LINES[(index, title)] = line
        print(line)
        return passed

    return _rec


def pytest_terminal_summary(terminalreporter):
    if not _LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_LINES):
        terminalreporter.write_line(_LINES[k])
