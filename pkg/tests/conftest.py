import pytest
from hypothesis import settings

from helpers import HAVE_Z3

settings.register_profile("default", deadline=None, max_examples=100)
settings.load_profile("default")

needs_solver = pytest.mark.skipif(not HAVE_Z3, reason="z3 executable not on PATH")

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
