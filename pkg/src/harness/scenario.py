"""
Scenario files: strict pydantic schema, `extends` inheritance and config hashing.
"""

import copy
import hashlib
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Literal, Mapping, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

import config
from attacks.types import AttackConfig, AttackKind
from ric.types import DefenceSettings, PlatformSettings

logger = logging.getLogger(__name__)

APP_IDS = ("kpimon", "qoe", "ad", "rapp", "ts", "rc")


class ScenarioError(Exception):
    """Scenario file could not be parsed or validated. `path` names the offending field."""

    def __init__(self, message: str, path: str = ""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid")


class CellSpec(StrictModel):
    cell_id: str = Field(min_length=1)
    position: Tuple[float, float]
    tx_power: float = 46.0
    bandwidth: float = Field(10.0, gt=0)
    max_ues: int = Field(20, ge=1)
    online: bool = True


class UeGroupSpec(StrictModel):
    prefix: str = Field("ue", min_length=1)
    count: int = Field(ge=1)
    initial_cell: Optional[str] = None
    area: Tuple[float, float, float, float]  # x_min, y_min, x_max, y_max
    speed: float = Field(0.0, ge=0)  # m per tick
    traffic_demand: float = Field(50.0, ge=0)

    @model_validator(mode="after")
    def _area_ordered(self):
        x0, y0, x1, y1 = self.area
        if x0 > x1 or y0 > y1:
            raise ValueError("area must be [x_min, y_min, x_max, y_max]")
        return self

    def ue_ids(self) -> List[str]:
        return [f"{self.prefix}-{i:02d}" for i in range(self.count)]


class PolicySpec(StrictModel):
    policy_id: str
    ue_scope: str = "ALL"
    preferences: List[Tuple[str, Literal["PREFER", "AVOID", "FORBID"]]]
    valid_from: int = Field(0, ge=0)
    valid_until: Optional[int] = None


class AppSpec(StrictModel):
    lam: float = Field(config.RIDGE_LAMBDA, ge=0)
    retrain_period: int = Field(config.RETRAIN_PERIOD, ge=1)
    train_window: int = Field(config.TRAIN_WINDOW, ge=1)
    retention: bool = True
    training_ue_ids: Optional[List[str]] = None
    ts_enabled: bool = True
    margin: float = Field(config.HYSTERESIS_MARGIN, gt=0)
    ts_priority: int = config.TS_PRIORITY
    ts_max_handovers: int = Field(config.TS_MAX_HANDOVERS_PER_TICK, ge=0)
    anomaly_window: int = Field(config.ANOMALY_WINDOW, ge=3)
    anomaly_threshold: float = Field(config.ANOMALY_THRESHOLD, gt=0)
    rapp_period: int = Field(config.RAPP_PERIOD, ge=1)
    sla_mbps: float = Field(config.SLA_MBPS, ge=0)
    load_threshold: float = Field(config.LOAD_THRESHOLD, ge=0)
    static_policies: List[PolicySpec] = Field(default_factory=list)
    per_ue_cap: float = Field(config.PER_UE_CAP_MBPS, gt=0)


class PlatformSpec(StrictModel):
    queue_capacity: int = Field(config.QUEUE_CAPACITY, ge=1)
    sub_window_capacity: int = Field(config.SUB_WINDOW_CAPACITY, ge=1)
    conflict_budget: int = Field(config.CONFLICT_BUDGET, ge=1)
    conflict_policy: Literal["priority", "first-wins"] = "priority"
    lease_ticks: int = Field(config.SUBSCRIPTION_LEASE_TICKS, ge=1)
    channel: Literal["plaintext", "secure"] = "plaintext"

    def settings(self) -> PlatformSettings:
        return PlatformSettings(**self.model_dump())


class DefenceSpec(StrictModel):
    access_control: Literal["allow-all", "least-privilege"] = "allow-all"
    zero_trust: bool = False
    detection: bool = False
    auto_quarantine: bool = False
    zone_edges: List[Tuple[str, str]] = Field(default_factory=lambda: [tuple(e) for e in config.ZONE_EDGES])
    profile_ticks: int = Field(config.PROFILE_TICKS, ge=config.PROFILE_MIN_TICKS)
    live_window: int = Field(config.LIVE_WINDOW, ge=1)
    threshold: float = Field(config.PROFILE_THRESHOLD, gt=0)
    epsilon: float = Field(config.PROFILE_EPSILON, gt=0)
    high_risk_factor: float = Field(config.HIGH_RISK_FACTOR, gt=0, le=1)

    def settings(self) -> DefenceSettings:
        data = self.model_dump()
        data["zone_edges"] = tuple(tuple(e) for e in data["zone_edges"])
        return DefenceSettings(**data)


class ObserverSpec(StrictModel):
    xapp_id: str = Field(min_length=1)
    namespaces: List[str] = Field(min_length=1)
    period: int = Field(10, ge=1)
    offset: int = Field(0, ge=0)
    zone: str = "analytics"


class AttackSpec(StrictModel):
    kind: AttackKind
    attacker_id: Optional[str] = None
    target: Optional[str] = None
    intensity: float = Field(1.0, ge=0)
    start: int = Field(0, ge=0)
    stop: Optional[int] = None  # exclusive; defaults to the end of the run
    params: Dict[str, Any] = Field(default_factory=dict)
    manifest: Optional[Dict[str, Any]] = None

    def resolved_id(self, index: int) -> str:
        return self.attacker_id or f"mal-{self.kind.value.lower().replace('_', '-')}-{index}"

    def to_config(self, index: int, ticks: int) -> AttackConfig:
        return AttackConfig(
            kind=self.kind,
            attacker_id=self.resolved_id(index),
            target=self.target,
            intensity=self.intensity,
            start=self.start,
            stop=self.stop if self.stop is not None else ticks,
            params=copy.deepcopy(self.params),
            manifest=copy.deepcopy(self.manifest),
        )


class Scenario(StrictModel):
    name: str = Field(min_length=1)
    description: str = ""
    seed: int = Field(0, ge=0)
    ticks: int = Field(ge=1)
    cells: List[CellSpec] = Field(min_length=1)
    ues: List[UeGroupSpec] = Field(default_factory=list)
    apps: AppSpec = Field(default_factory=AppSpec)
    platform: PlatformSpec = Field(default_factory=PlatformSpec)
    defences: DefenceSpec = Field(default_factory=DefenceSpec)
    observers: List[ObserverSpec] = Field(default_factory=list)
    attacks: List[AttackSpec] = Field(default_factory=list)

    @model_validator(mode="after")
    def _ids_consistent(self):
        cell_ids = [c.cell_id for c in self.cells]
        if len(set(cell_ids)) != len(cell_ids):
            raise ValueError("cell ids must be unique")
        for group in self.ues:
            if group.initial_cell is not None and group.initial_cell not in cell_ids:
                raise ValueError(f"ue group {group.prefix}: unknown initial_cell {group.initial_cell}")
        ue_ids = self.ue_ids()
        if len(set(ue_ids)) != len(ue_ids):
            raise ValueError("ue group prefixes produce duplicate UE ids")
        unknown = set(self.apps.training_ue_ids or ()) - set(ue_ids)
        if unknown:
            raise ValueError(f"training_ue_ids not in the UE population: {sorted(unknown)}")
        for policy in self.apps.static_policies:
            for cell_id, _ in policy.preferences:
                if cell_id not in cell_ids:
                    raise ValueError(f"policy {policy.policy_id}: unknown cell {cell_id}")
        taken = set(APP_IDS) | {config.ADMIN_ID, config.E2TERM_ID}
        for observer in self.observers:
            if observer.xapp_id in taken:
                raise ValueError(f"observer id {observer.xapp_id} already in use")
            taken.add(observer.xapp_id)
        for index, attack in enumerate(self.attacks):
            attacker_id = attack.resolved_id(index)
            if attacker_id in taken:
                raise ValueError(f"attacker id {attacker_id} already in use")
            taken.add(attacker_id)
            stop = attack.stop if attack.stop is not None else self.ticks
            if not attack.start < stop:
                raise ValueError(f"attack {attacker_id}: need start < stop, got [{attack.start}, {stop})")
        return self

    def ue_ids(self) -> List[str]:
        return [ue_id for group in self.ues for ue_id in group.ue_ids()]

    def attack_configs(self) -> List[AttackConfig]:
        return [a.to_config(i, self.ticks) for i, a in enumerate(self.attacks)]

    def to_dict(self) -> Dict:
        return self.model_dump(mode="json")

    def canonical_bytes(self) -> bytes:
        return canonical_json(self.to_dict()).encode("utf-8")

    @property
    def family(self) -> str:
        data = self.to_dict()
        topology = {"cells": data["cells"], "ues": data["ues"], "ticks": data["ticks"]}
        return hashlib.sha256(canonical_json(topology).encode("utf-8")).hexdigest()[:12]

    def config_hash(self) -> str:
        return f"{self.family}:{hashlib.sha256(self.canonical_bytes()).hexdigest()[:16]}"


def canonical_json(data: Any) -> str:
    return json.dumps(data, sort_keys=True, separators=(",", ":"), allow_nan=False)


def deep_merge(base: Mapping, override: Mapping) -> Dict:
    """Objects merge key-wise; lists and scalars in `override` replace."""
    merged = copy.deepcopy(dict(base))
    for key, value in override.items():
        if isinstance(value, Mapping) and isinstance(merged.get(key), Mapping):
            merged[key] = deep_merge(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def _load_raw(path: Path, seen: Tuple[Path, ...] = ()) -> Dict:
    path = path.resolve()
    if path in seen:
        raise ScenarioError(f"extends cycle through {path.name}", "extends")
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ScenarioError(f"{path.name}: invalid JSON ({e.msg} at line {e.lineno})") from e
    if not isinstance(data, dict):
        raise ScenarioError(f"{path.name}: top level must be an object")
    parent = data.pop("extends", None)
    if parent is None:
        return data
    if not isinstance(parent, str):
        raise ScenarioError("must be a relative file path", "extends")
    return deep_merge(_load_raw(path.parent / parent, seen + (path,)), data)


def parse_scenario(data: Mapping) -> Scenario:
    """
    Validate a resolved scenario document.

    Raises:
        ScenarioError: first validation error, with its dotted field path
    """
    try:
        return Scenario.model_validate(dict(data))
    except ValidationError as e:
        first = e.errors()[0]
        path = ".".join(str(p) for p in first["loc"])
        raise ScenarioError(first["msg"], path) from e


def load_scenario(path) -> Scenario:
    """
    Load, resolve `extends` and validate a scenario file.

    Raises:
        OSError: file missing or unreadable
        ScenarioError: parse or validation error
    """
    scenario = parse_scenario(_load_raw(Path(path)))
    logger.debug("loaded scenario %s (%s)", scenario.name, scenario.config_hash())
    return scenario


def set_parameter(data: Dict, dotted: str, value: Any) -> Dict:
    """
    Copy of `data` with the value at a dotted path replaced (list items by index).

    Raises:
        ScenarioError: path does not exist in the resolved scenario
    """
    updated = copy.deepcopy(data)
    parts = dotted.split(".")
    node: Any = updated
    for depth, part in enumerate(parts):
        last = depth == len(parts) - 1
        if isinstance(node, list):
            if not part.isdigit() or int(part) >= len(node):
                raise ScenarioError("unknown parameter", dotted)
            key: Any = int(part)
        elif isinstance(node, dict) and part in node:
            key = part
        else:
            raise ScenarioError("unknown parameter", dotted)
        if last:
            node[key] = value
        else:
            node = node[key]
    return updated


def with_parameters(scenario: Scenario, parameters: Mapping[str, Any]) -> Scenario:
    data = scenario.to_dict()
    for dotted, value in parameters.items():
        data = set_parameter(data, dotted, value)
    return parse_scenario(data)
