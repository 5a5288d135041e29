import pytest

_ACCEPTANCE = []


@pytest.fixture
def criterion():
    """Record one acceptance line: ``criterion(label, passed, detail)``."""

    def record(label, passed, detail=""):
        line = f"{'PASS' if passed else 'FAIL'}  {label}: {detail}"
        _ACCEPTANCE.append(line)
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE:
            terminalreporter.write_line(line)
