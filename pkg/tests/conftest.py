import numpy as np
import pytest

from kirchhoff_obstacle.config import parse_config_text


def preset_problem(preset, **overrides):
    """Problem of a named preset with optional key overrides."""
    return parse_config_text("", {"preset": preset, **overrides}).problem()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


ACCEPTANCE_LINES = []


@pytest.fixture
def report():
    """Record one acceptance line; all lines are printed in the terminal summary."""

    def _report(criterion, name, ok, detail=""):
        ACCEPTANCE_LINES.append(f"criterion {criterion:<3} {'PASS' if ok else 'FAIL'}  {name}: {detail}")
        return ok

    return _report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
