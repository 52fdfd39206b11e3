import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from leakbound.frontend import load_corpus  # noqa: E402

# one line per acceptance criterion, printed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def record(criterion: int, description: str, ok: bool, detail: str = "") -> None:
    """Record (and print) a pass/fail line for an acceptance criterion, then assert it."""
    line = f"{'PASS' if ok else 'FAIL'} criterion {criterion:>2}: {description}"
    if detail:
        line += f" [{detail}]"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def corpus():
    """Cached ``(program, harness)`` per ``(name, arch)``."""
    cache = {}

    def get(name, arch=32):
        key = (name, arch)
        if key not in cache:
            cache[key] = load_corpus(name, arch)
        return cache[key]

    return get
