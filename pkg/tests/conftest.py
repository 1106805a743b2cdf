import pytest

_LINES = []


@pytest.fixture
def accept():
    """accept(n, ok, detail) records one acceptance line and asserts it."""

    def record(n, ok, detail):
        line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"
        _LINES.append(line)
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance")
        for line in _LINES:
            terminalreporter.write_line(line)
