"""
Platform domain types: messages, SDL records, subscriptions, control requests,
xApp descriptors, audit entries and the platform/defence settings.
"""

import hashlib
import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, Optional, Tuple

import config

PLATFORM_IDS = frozenset({config.ADMIN_ID, config.E2TERM_ID})


class MsgType(str, Enum):
    QOE_PREDICTION = "QOE_PREDICTION"
    ANOMALY_ALERT = "ANOMALY_ALERT"
    TS_CONTROL = "TS_CONTROL"
    A1_POLICY = "A1_POLICY"
    E2_REPORT = "E2_REPORT"
    ROUTE_UPDATE = "ROUTE_UPDATE"
    E2_SUB_REQ = "E2_SUB_REQ"


# Required payload fields per message type
MESSAGE_SCHEMAS: Dict[MsgType, Tuple[str, ...]] = {
    MsgType.QOE_PREDICTION: ("ue_id", "serving_cell", "per_cell", "model_version"),
    MsgType.ANOMALY_ALERT: ("ue_id", "score", "threshold", "flagged"),
    MsgType.TS_CONTROL: ("request_id", "ue_id", "target_cell", "priority"),
    MsgType.A1_POLICY: ("policies",),
    MsgType.E2_REPORT: ("node", "ue_metrics", "cell_metrics"),
    MsgType.ROUTE_UPDATE: ("entries",),
    MsgType.E2_SUB_REQ: ("node", "report_period"),
}


def payload_valid(msg_type: MsgType, payload: Any) -> bool:
    """True when `payload` carries every field the message type requires."""
    if not isinstance(payload, dict):
        return False
    return all(name in payload for name in MESSAGE_SCHEMAS[msg_type])


def payload_hash(payload: Any) -> str:
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass(frozen=True)
class Message:
    msg_type: MsgType
    sender: str
    payload: Dict
    tick: int
    token: Optional[Any] = None  # IdentityToken when zero trust is on


@dataclass(frozen=True)
class Delivered:
    to: str

    ok = True


@dataclass(frozen=True)
class Dropped:
    reason: str  # no-route | queue-full | unauthorized | malformed | quarantined

    ok = False


@dataclass(frozen=True)
class SdlRecord:
    namespace: str
    key: str
    value: Dict
    writer: str
    version: int
    tick: int


@dataclass(frozen=True)
class RouteUpdateResult:
    accepted: bool
    generation: int
    reason: str = ""


@dataclass
class E2Subscription:
    sub_id: str
    subscriber: str
    node: str
    report_period: int
    created_tick: int
    expires_at: int
    active: bool = True

    def __post_init__(self):
        if self.report_period < 1:
            raise ValueError("report_period must be >= 1")

    def reports_at(self, tick: int) -> bool:
        return self.active and tick < self.expires_at and (tick - self.created_tick) % self.report_period == 0


@dataclass(frozen=True)
class SubscribeResult:
    status: str  # accepted | renewed | rejected
    sub_id: Optional[str] = None
    reason: str = ""

    @property
    def ok(self) -> bool:
        return self.status != "rejected"


@dataclass(frozen=True)
class RicControlRequest:
    request_id: str
    issuer: str
    ue_id: str
    target_cell: str
    priority: int
    tick: int

    def __post_init__(self):
        if not self.request_id:
            raise ValueError("request_id must be non-empty")


@dataclass(frozen=True)
class ControlOutcome:
    request_id: str
    issuer: str
    ue_id: str
    target_cell: str
    submit_tick: int
    resolve_tick: int
    verdict: str  # accepted | rejected-conflict | purged
    ran_status: str = ""  # applied | noop | rejected-capacity | error:<kind>

    @property
    def latency_ticks(self) -> int:
        return self.resolve_tick - self.submit_tick + 1

    def to_dict(self) -> Dict:
        return {
            "request_id": self.request_id,
            "issuer": self.issuer,
            "ue_id": self.ue_id,
            "target_cell": self.target_cell,
            "submit_tick": self.submit_tick,
            "resolve_tick": self.resolve_tick,
            "verdict": self.verdict,
            "ran_status": self.ran_status,
        }


@dataclass(frozen=True)
class XAppDescriptor:
    """Permission manifest an xApp presents at registration."""

    xapp_id: str
    namespaces: Tuple[Tuple[str, str], ...] = ()  # (namespace, "read" | "write")
    sends: Tuple[str, ...] = ()
    receives: Tuple[str, ...] = ()
    e2_subscribe: bool = False
    e2_control: bool = False
    route_update: bool = False
    zone: str = "default"

    def __post_init__(self):
        if not self.xapp_id:
            raise ValueError("xapp_id must be non-empty")
        for name, values in (("namespaces", self.namespaces), ("sends", self.sends),
                             ("receives", self.receives)):
            if len(set(values)) != len(values):
                raise ValueError(f"{self.xapp_id}: duplicate entries in {name}")
        for _, mode in self.namespaces:
            if mode not in ("read", "write"):
                raise ValueError(f"{self.xapp_id}: namespace mode must be read or write, got {mode!r}")

    @property
    def declared_namespaces(self) -> frozenset:
        return frozenset(ns for ns, _ in self.namespaces)

    @property
    def write_namespaces(self) -> frozenset:
        return frozenset(ns for ns, mode in self.namespaces if mode == "write")

    @classmethod
    def from_dict(cls, data: Dict) -> "XAppDescriptor":
        e2 = data.get("e2", {})
        return cls(
            xapp_id=data["xapp_id"],
            namespaces=tuple((ns, mode) for ns, mode in data.get("namespaces", [])),
            sends=tuple(data.get("sends", [])),
            receives=tuple(data.get("receives", [])),
            e2_subscribe=bool(e2.get("subscribe", False)),
            e2_control=bool(e2.get("control", False)),
            route_update=bool(data.get("route_update", False)),
            zone=data.get("zone", "default"),
        )


@dataclass(frozen=True)
class AuditEntry:
    tick: int
    caller: str
    op: str
    resource: str
    verdict: str
    detail: Dict = field(default_factory=dict)

    def to_dict(self) -> Dict:
        return {
            "tick": self.tick,
            "caller": self.caller,
            "op": self.op,
            "resource": self.resource,
            "verdict": self.verdict,
            **({"detail": self.detail} if self.detail else {}),
        }


@dataclass(frozen=True)
class PlatformSettings:
    queue_capacity: int = config.QUEUE_CAPACITY
    sub_window_capacity: int = config.SUB_WINDOW_CAPACITY
    conflict_budget: int = config.CONFLICT_BUDGET
    conflict_policy: str = "priority"  # priority | first-wins
    lease_ticks: int = config.SUBSCRIPTION_LEASE_TICKS
    channel: str = "plaintext"  # plaintext | secure

    def __post_init__(self):
        if min(self.queue_capacity, self.sub_window_capacity, self.conflict_budget, self.lease_ticks) < 1:
            raise ValueError("platform capacities must be >= 1")
        if self.conflict_policy not in ("priority", "first-wins"):
            raise ValueError(f"unknown conflict policy {self.conflict_policy!r}")
        if self.channel not in ("plaintext", "secure"):
            raise ValueError(f"unknown channel {self.channel!r}")


@dataclass(frozen=True)
class DefenceSettings:
    access_control: str = "allow-all"  # allow-all | least-privilege
    zero_trust: bool = False
    detection: bool = False
    auto_quarantine: bool = False
    zone_edges: Tuple[Tuple[str, str], ...] = ()
    profile_ticks: int = config.PROFILE_TICKS
    live_window: int = config.LIVE_WINDOW
    threshold: float = config.PROFILE_THRESHOLD
    epsilon: float = config.PROFILE_EPSILON
    high_risk_factor: float = config.HIGH_RISK_FACTOR

    def __post_init__(self):
        if self.access_control not in ("allow-all", "least-privilege"):
            raise ValueError(f"unknown access control mode {self.access_control!r}")

    @property
    def any_enabled(self) -> bool:
        return self.access_control != "allow-all" or self.zero_trust or self.detection
