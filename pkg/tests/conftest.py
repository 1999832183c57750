import pytest

ACCEPTANCE_LINES = []


@pytest.fixture
def record():
    """Append one PASS/FAIL line for an acceptance criterion."""

    def _record(number, name, passed, detail):
        line = f"criterion {number} {'PASS' if passed else 'FAIL'} {name}: {detail}"
        ACCEPTANCE_LINES.append((number, line))
        print(line)
        return passed

    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(line)
