import numpy as np
import pytest

from otctrack.imaging import Frame

ACCEPTANCE_LINES = []


def record_acceptance(number, name, passed, detail=""):
    line = f"criterion {number:>2} [{'PASS' if passed else 'FAIL'}] {name}"
    if detail:
        line += f" -- {detail}"
    ACCEPTANCE_LINES.append((number, line))
    print(line)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_frame(rng, w, h):
    return Frame(rng.integers(0, 256, size=(h, w, 3), dtype=np.uint8))
