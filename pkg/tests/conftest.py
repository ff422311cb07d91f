import pytest

ACCEPTANCE_LINES = []


@pytest.fixture
def report():
    """Record one acceptance line: report(number, passed, text)."""

    def add(number, passed, text):
        line = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {text}"
        ACCEPTANCE_LINES.append((number, line))
        print(line)

    return add


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
