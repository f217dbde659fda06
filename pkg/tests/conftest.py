"""Shared pytest plumbing: the acceptance-criterion report."""
import pytest

_CRITERIA = []


@pytest.fixture
def criterion():
    """Record one acceptance criterion outcome, then assert it."""

    def record(name, ok, detail=""):
        line = f"{'PASS' if ok else 'FAIL'}  {name}" + (f"  ({detail})" if detail else "")
        _CRITERIA.append(line)
        print(line)
        assert ok, f"{name}: {detail}"

    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in _CRITERIA:
            terminalreporter.write_line(line)
