"""Bundled UAV-booking specification, topology and scenario fixtures."""

from __future__ import annotations

import json
from importlib import resources
from pathlib import Path

from ..partition import Topology
from ..speclang import ValidatedRuleSet, check_safety, parse_spec

BUNDLED_SCENARIOS = (
    "nominal",
    "fault_forged_rtf",
    "fault_delayed_rtf",
    "fault_tampered_log",
)


def _data_root() -> Path:
    return Path(resources.files(__package__))  # type: ignore[arg-type]


def spec_path() -> Path:
    return _data_root() / "uav.adl"


def topology_path() -> Path:
    return _data_root() / "uav_topology.json"


def scenario_path(name: str) -> Path:
    return _data_root() / "scenarios" / f"{name}.json"


def load_spec_file(path: str | Path) -> ValidatedRuleSet:
    return check_safety(parse_spec(Path(path).read_text(encoding="utf-8")))


def load_topology_file(path: str | Path) -> tuple[Topology, dict[str, str]]:
    """Topology plus the justification-goal map (path -> goal predicate)."""
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    return Topology.from_dict(data), dict(data.get("justification_goals", {}))
