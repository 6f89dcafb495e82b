import numpy as np
import pytest

from fbgforce import CALIBRATED_ROD, NodeGrid

ACCEPTANCE_LINES = []


def record_acceptance(number, name, ok, detail=""):
    """Print and keep a one-line verdict for an acceptance criterion."""
    verdict = {True: "PASS", False: "FAIL", None: "INFO"}[ok]
    line = f"[{verdict}] criterion {number}: {name}" + (f" | {detail}" if detail else "")
    print(line)
    ACCEPTANCE_LINES.append(line)
    return line


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda l: int(l.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def rod():
    return CALIBRATED_ROD


@pytest.fixture(scope="session")
def grid250(rod):
    return NodeGrid(rod.length, 250)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
