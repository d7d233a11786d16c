from __future__ import annotations

import pytest

from auditmon.data import (
    BUNDLED_SCENARIOS,
    load_spec_file,
    load_topology_file,
    scenario_path,
    spec_path,
    topology_path,
)
from auditmon.sim import load_scenario
from auditmon.speclang import stratify


@pytest.fixture(scope="session")
def uav_rules():
    return load_spec_file(spec_path())


@pytest.fixture(scope="session")
def uav_strata(uav_rules):
    return stratify(uav_rules)


@pytest.fixture(scope="session")
def uav_topology():
    topology, _ = load_topology_file(topology_path())
    return topology


@pytest.fixture(scope="session")
def uav_goals():
    _, goals = load_topology_file(topology_path())
    return goals


@pytest.fixture(scope="session")
def bundled_scenarios():
    return {name: load_scenario(scenario_path(name)) for name in BUNDLED_SCENARIOS}
