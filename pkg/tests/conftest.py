from __future__ import annotations

from pathlib import Path

import pytest

from pbslab.instances import Instance, load_instances
from pbslab.plan import Plan

DATA = Path(__file__).parent / "data"
GOLDEN = Path(__file__).parent / "golden"


def pytest_addoption(parser):
    parser.addoption("--update-golden", action="store_true", help="rewrite golden files instead of comparing")
    parser.addoption("--retrain", action="store_true", help="retrain the 4x4 policy from scratch (hours)")


@pytest.fixture
def update_golden(request) -> bool:
    return request.config.getoption("--update-golden")


@pytest.fixture
def anchor() -> Instance:
    """4x4 grid, items [2,2] and [1,1], escorts [0,1] and [1,2], I/O [0,0] and [0,3]."""
    return load_instances(DATA / "anchor_instance.json")[0]


@pytest.fixture
def anchor_plan() -> Plan:
    """A 13-move joint retrieval sequence for ``anchor`` (optimal)."""
    return Plan.load(DATA / "anchor_plan.json")


def check_golden(path: Path, text: str, update: bool) -> None:
    if update or not path.exists():
        path.write_text(text)
    assert path.read_text() == text


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
