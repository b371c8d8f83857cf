"""
Shared fixtures
"""
from pathlib import Path

import pytest

from app.harness.scenario import load_scenario
from app.protocol.models import ProtocolConfig, Value, VoteMessage
from app.sim.registry import GenuinenessRegistry

SCENARIO_DIR = Path(__file__).parent.parent / "scenarios"


class AlwaysGenuine:
    def is_genuine(self, vote: VoteMessage) -> bool:
        return True


@pytest.fixture
def cfg():
    return ProtocolConfig.for_faults(1)


@pytest.fixture
def genuine():
    return AlwaysGenuine()


@pytest.fixture
def registry():
    return GenuinenessRegistry()


@pytest.fixture
def scenario():
    """Load a bundled scenario by file stem."""
    def _load(name: str):
        return load_scenario(SCENARIO_DIR / f"{name}.scn")
    return _load


def value(payload: str | None) -> Value:
    return Value(payload=payload)
