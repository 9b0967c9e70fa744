import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("w1mg", max_examples=60, deadline=None)
settings.load_profile("w1mg")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    from helpers import ACCEPTANCE_LINES

    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for _, line, notes in sorted(ACCEPTANCE_LINES, key=lambda t: t[0]):
        terminalreporter.write_line(line)
        for note in notes:
            terminalreporter.write_line("    " + note)
