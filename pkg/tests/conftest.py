import numpy as np
import pytest

_ACCEPTANCE_LINES = []


def acceptance_check(name: str, ok: bool, detail: str = ""):
    """Record and assert one acceptance criterion; the collected verdict
    lines are replayed in the terminal summary."""
    line = f"[ACCEPTANCE] {name}: {'PASS' if ok else 'FAIL'}"
    if detail:
        line += f"  ({detail})"
    _ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
