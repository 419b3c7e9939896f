from pathlib import Path

import numpy as np
import pytest

DATA = Path(__file__).parent / "data"

_ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def ei_oracle():
    """Frozen (x, Ei(x)) table built with mpmath; see data/build_oracles.py."""
    table = np.loadtxt(DATA / "ei_oracle.txt", delimiter=",", comments="#")
    return table[:, 0], table[:, 1]


@pytest.fixture
def acceptance():
    """Record one pass/fail line for an acceptance criterion; also printed live."""

    def report(number: int, ok: bool, summary: str):
        line = f"ACCEPTANCE {number}: {'PASS' if ok else 'FAIL'} - {summary}"
        _ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return report


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
