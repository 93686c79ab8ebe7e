"""
Non-RT rApp generating A1 steering policies from long-horizon KPIs.
"""

import logging
from collections import defaultdict
from dataclasses import dataclass
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import config
from agents.base import CELL_METRIC, UE_METRIC, XApp, tick_prefix
from ric.types import MsgType, XAppDescriptor

logger = logging.getLogger(__name__)

PREFERENCES = ("PREFER", "AVOID", "FORBID")
ALL_UES = "ALL"


@dataclass(frozen=True)
class A1Policy:
    policy_id: str
    ue_scope: str  # ue_id or ALL
    preferences: Tuple[Tuple[str, str], ...]  # (cell_id, PREFER | AVOID | FORBID)
    valid_from: int = 0
    valid_until: Optional[int] = None  # exclusive; None = open-ended

    def __post_init__(self):
        cells = [cell_id for cell_id, _ in self.preferences]
        if len(set(cells)) != len(cells):
            raise ValueError(f"{self.policy_id}: more than one preference for a cell")
        for _, pref in self.preferences:
            if pref not in PREFERENCES:
                raise ValueError(f"{self.policy_id}: unknown preference {pref!r}")

    def applies(self, ue_id: str, tick: int) -> bool:
        in_window = self.valid_from <= tick and (self.valid_until is None or tick < self.valid_until)
        return in_window and self.ue_scope in (ue_id, ALL_UES)

    def to_dict(self) -> Dict:
        return {
            "policy_id": self.policy_id,
            "ue_scope": self.ue_scope,
            "preferences": [[c, p] for c, p in self.preferences],
            "valid_from": self.valid_from,
            "valid_until": self.valid_until,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "A1Policy":
        return cls(
            policy_id=data["policy_id"],
            ue_scope=data.get("ue_scope", ALL_UES),
            preferences=tuple((c, p) for c, p in data["preferences"]),
            valid_from=int(data.get("valid_from", 0)),
            valid_until=data.get("valid_until"),
        )


def rapp_generate_policies(ue_history: Sequence[Mapping], cell_history: Sequence[Mapping],
                           tick: int, sla_mbps: float = config.SLA_MBPS,
                           load_threshold: float = config.LOAD_THRESHOLD,
                           validity: int = config.RAPP_PERIOD) -> List[A1Policy]:
    """
    SLA-driven policies over one observation horizon.

    A UE whose mean throughput is below `sla_mbps` gets PREFER(least-loaded
    reported neighbour) and AVOID(serving) when that neighbour's mean load is
    below `load_threshold`.
    """
    throughput = defaultdict(list)
    latest: Dict[str, Mapping] = {}
    for ue in ue_history:
        throughput[ue["ue_id"]].append(float(ue["throughput_dl"]))
        if ue["ue_id"] not in latest or ue["tick"] >= latest[ue["ue_id"]]["tick"]:
            latest[ue["ue_id"]] = ue
    loads = defaultdict(list)
    for cell in cell_history:
        loads[cell["cell_id"]].append(float(cell["load"]))
    mean_load = {cell_id: sum(v) / len(v) for cell_id, v in loads.items()}

    policies = []
    for ue_id in sorted(throughput):
        samples = throughput[ue_id]
        if sum(samples) / len(samples) >= sla_mbps:
            continue
        serving = latest[ue_id]["serving_cell"]
        candidates = [
            (mean_load[cell_id], cell_id)
            for cell_id, _ in latest[ue_id]["neighbours"]
            if cell_id != serving and cell_id in mean_load and mean_load[cell_id] < load_threshold
        ]
        if not candidates:
            continue
        _, target = min(candidates)
        policies.append(A1Policy(
            policy_id=f"sla:{ue_id}:{tick:08d}",
            ue_scope=ue_id,
            preferences=((target, "PREFER"), (serving, "AVOID")),
            valid_from=tick,
            valid_until=tick + validity,
        ))
    return policies


def rapp_descriptor(xapp_id: str = "rapp", zone: str = "policy") -> XAppDescriptor:
    return XAppDescriptor(
        xapp_id=xapp_id,
        namespaces=((UE_METRIC, "read"), (CELL_METRIC, "read")),
        sends=(MsgType.A1_POLICY.value,),
        zone=zone,
    )


class PolicyRApp(XApp):
    """Runs every `period` ticks; republishes operator static policies alongside SLA ones."""

    def __init__(self, platform, xapp_id: str = "rapp", period: int = config.RAPP_PERIOD,
                 sla_mbps: float = config.SLA_MBPS, load_threshold: float = config.LOAD_THRESHOLD,
                 static_policies: Iterable[A1Policy] = ()):
        super().__init__(platform, rapp_descriptor(xapp_id))
        self.period = period
        self.sla_mbps = sla_mbps
        self.load_threshold = load_threshold
        self.static_policies = list(static_policies)
        self.published = 0

    def tick(self, tick: int) -> None:
        if tick == 0 and self.static_policies:
            self.publish(self.static_policies, tick)
        if (tick + 1) % self.period != 0:
            return
        ue_history, cell_history = [], []
        for t in range(max(0, tick - self.period + 1), tick + 1):
            ue_history.extend(r.value for r in self.platform.sdl_scan(self.xapp_id, UE_METRIC, tick_prefix(t)))
            cell_history.extend(r.value for r in self.platform.sdl_scan(self.xapp_id, CELL_METRIC, tick_prefix(t)))
        policies = rapp_generate_policies(ue_history, cell_history, tick, self.sla_mbps,
                                          self.load_threshold, self.period)
        self.publish([*self.static_policies, *policies], tick)
        logger.debug("tick %d: rApp published %d SLA policies", tick, len(policies))

    def publish(self, policies: List[A1Policy], tick: int) -> None:
        self.send(MsgType.A1_POLICY, {"policies": [p.to_dict() for p in policies], "tick": tick}, tick)
        self.published += len(policies)
