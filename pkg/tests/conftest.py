import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

import acceptance_log  # noqa: E402
from hybrid_arm import StructuralParams  # noqa: E402


@pytest.fixture
def params():
    return StructuralParams()


@pytest.fixture
def open_params():
    """Defaults but with the separation allowed down to the upright linkage."""
    return StructuralParams(b_min=0.0)


def pytest_terminal_summary(terminalreporter):
    if acceptance_log.LINES:
        terminalreporter.section("acceptance criteria")
        for line in acceptance_log.LINES:
            terminalreporter.write_line(line)
