import pytest

_VERDICTS: list[str] = []


@pytest.fixture
def verdict():
    """Record a one-line pass/fail verdict, then assert it."""
    def record(label: str, passed: bool, detail: str):
        line = f"[{'PASS' if passed else 'FAIL'}] {label}: {detail}"
        _VERDICTS.append(line)
        print(line)
        assert passed, line
    return record


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in _VERDICTS:
            terminalreporter.write_line(line)
