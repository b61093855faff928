from __future__ import annotations

from dataclasses import replace
from pathlib import Path

import pytest

from nlslab.config import RunConfig, load_config
from nlslab.evolve import evolve
from nlslab.ground_state import cached_ground_state, thresholds

ROOT = Path(__file__).resolve().parents[1]
CONFIGS = ROOT / "configs"

ACCEPTANCE_LINES: list[str] = []


class RunCache:
    """Runs of the shipped configurations, shared across test modules."""

    def __init__(self):
        self._series = {}

    def config(self, name: str, **changes) -> RunConfig:
        cfg = load_config(CONFIGS / f"{name}.cfg")
        return replace(cfg, **changes) if changes else cfg

    def series(self, name: str, **changes):
        key = (name, tuple(sorted(changes.items())))
        if key not in self._series:
            self._series[key] = evolve(self.config(name, **changes))
        return self._series[key]


_CACHE = RunCache()


@pytest.fixture(scope="session")
def runs() -> RunCache:
    return _CACHE


@pytest.fixture(scope="session")
def gs():
    return cached_ground_state()


@pytest.fixture(scope="session")
def tc(gs):
    return thresholds(gs)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
