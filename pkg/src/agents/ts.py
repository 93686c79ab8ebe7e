import logging
import math
from dataclasses import dataclass
from typing import Dict, Iterable, List, Mapping, Optional, Set

import config
from agents.base import CELL_METRIC, XApp, tick_prefix
from agents.rapp import A1Policy
from ric.errors import AccessDeniedError
from ric.types import MsgType, XAppDescriptor

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SteeringDecision:
    ue_id: str
    serving_cell: str
    target_cell: str
    gain: float
    reason: str  # margin | anomaly | avoid


def merge_preferences(policies: Iterable[A1Policy], ue_id: str, tick: int) -> Dict[str, str]:
    """cell -> preference for one UE; FORBID beats AVOID beats PREFER."""
    rank = {"PREFER": 0, "AVOID": 1, "FORBID": 2}
    merged: Dict[str, str] = {}
    for policy in policies:
        if not policy.applies(ue_id, tick):
            continue
        for cell_id, pref in policy.preferences:
            if cell_id not in merged or rank[pref] > rank[merged[cell_id]]:
                merged[cell_id] = pref
    return merged


def steering_candidates(prefs: Mapping[str, str], prediction: Mapping,
                        kpis: Optional[Mapping[str, Mapping]] = None) -> Dict[str, float]:
    """Predicted cells a UE may move to or stay on: not FORBID, and not full when KPIs are known."""
    serving = prediction["serving_cell"]

    def has_room(cell_id: str) -> bool:
        if kpis is None or cell_id == serving or cell_id not in kpis:
            return True
        return float(kpis[cell_id]["load"]) < 100.0

    return {
        cell_id: float(value) for cell_id, value in prediction["per_cell"].items()
        if prefs.get(cell_id) != "FORBID" and has_room(cell_id)
    }


def ts_decide(policies: Iterable[A1Policy], prediction: Mapping, anomalous: bool = False,
              kpis: Optional[Mapping[str, Mapping]] = None, tick: int = 0,
              margin: float = config.HYSTERESIS_MARGIN) -> Optional[SteeringDecision]:
    """
    Handover decision for one UE prediction, or None.

    Candidates are the predicted cells minus FORBID cells (and full cells when
    KPIs are known). The best candidate wins ties when PREFER. A handover is
    issued when the best cell beats the serving prediction by more than
    `margin`. A FORBID serving cell forces a move; an AVOID serving cell or an
    anomaly flag only needs the best cell to be strictly better.
    """
    ue_id = prediction["ue_id"]
    serving = prediction["serving_cell"]
    per_cell = {cell_id: float(v) for cell_id, v in prediction["per_cell"].items()}
    if serving not in per_cell:
        return None
    prefs = merge_preferences(policies, ue_id, tick)
    candidates = steering_candidates(prefs, prediction, kpis)
    if not candidates:
        logger.debug("no candidate cell for %s", ue_id)
        return None
    best = min(candidates, key=lambda c: (-candidates[c], prefs.get(c) != "PREFER", c))
    if best == serving:
        return None

    serving_value = per_cell[serving]
    gain = candidates[best] / serving_value if serving_value > 0 else math.inf
    improves = candidates[best] > serving_value
    if prefs.get(serving) == "FORBID" or (prefs.get(serving) == "AVOID" and improves):
        reason = "avoid"
    elif anomalous and improves:
        reason = "anomaly"
    elif candidates[best] > margin * serving_value:
        reason = "margin"
    else:
        return None
    return SteeringDecision(ue_id, serving, best, gain, reason)


def ts_descriptor(xapp_id: str = "ts", zone: str = "control") -> XAppDescriptor:
    return XAppDescriptor(
        xapp_id=xapp_id,
        namespaces=((CELL_METRIC, "read"),),
        sends=(MsgType.TS_CONTROL.value,),
        receives=(
            MsgType.QOE_PREDICTION.value,
            MsgType.ANOMALY_ALERT.value,
            MsgType.A1_POLICY.value,
        ),
        zone=zone,
    )


class TrafficSteering(XApp):
    """
    Traffic steering xApp.

    Consumes QoE predictions, anomaly alerts and A1 policies from its inbox plus
    the current Cell-Metric KPIs, and sends at most `max_handovers` handover
    requests per tick (largest gain first) to the RC xApp.

    `received` counts the predictions that arrived each tick. `fresh` holds the
    UEs with a prediction for the current and previous tick only. A tick is
    starved when nothing arrived or no UE had a candidate cell left.
    """

    def __init__(self, platform, xapp_id: str = "ts", margin: float = config.HYSTERESIS_MARGIN,
                 priority: int = config.TS_PRIORITY,
                 max_handovers: int = config.TS_MAX_HANDOVERS_PER_TICK):
        super().__init__(platform, ts_descriptor(xapp_id))
        self.margin = margin
        self.priority = priority
        self.max_handovers = max_handovers
        self.policies: List[A1Policy] = []
        self.decisions: List[Dict] = []
        self.fresh: Dict[int, Set[str]] = {}
        self.received: Dict[int, int] = {}
        self.starved = 0

    def _remember(self, tick: int, ue_ids: Set[str]) -> None:
        self.fresh[tick] = ue_ids
        self.received[tick] = len(ue_ids)
        for old in [t for t in self.fresh if t < tick - 1]:
            del self.fresh[old]

    def tick(self, tick: int) -> None:
        predictions: Dict[str, Mapping] = {}
        flagged: Set[str] = set()
        for message in self.receive():
            payload = message.payload
            if message.msg_type == MsgType.QOE_PREDICTION:
                predictions[payload["ue_id"]] = payload
            elif message.msg_type == MsgType.ANOMALY_ALERT and payload.get("flagged"):
                flagged.add(payload["ue_id"])
            elif message.msg_type == MsgType.A1_POLICY:
                self.policies = [A1Policy.from_dict(p) for p in payload["policies"]]
        self._remember(tick, set(predictions))
        if not predictions:
            if self.fresh.get(tick - 1):
                logger.warning("tick %d: %s received no QoE predictions", tick, self.xapp_id)
            self.starved += 1
            return

        try:
            kpis = {r.value["cell_id"]: r.value
                    for r in self.platform.sdl_scan(self.xapp_id, CELL_METRIC, tick_prefix(tick))}
        except AccessDeniedError:
            kpis = None

        decisions = []
        stranded = 0
        for ue_id in sorted(predictions):
            prediction = predictions[ue_id]
            if not steering_candidates(merge_preferences(self.policies, ue_id, tick), prediction, kpis):
                stranded += 1
                self.stats["no_candidates"] += 1
                continue
            decision = ts_decide(self.policies, prediction, ue_id in flagged, kpis, tick, self.margin)
            if decision is not None:
                decisions.append(decision)
        if stranded == len(predictions):
            logger.warning("tick %d: %s has no candidate cell for any of %d UEs", tick, self.xapp_id, stranded)
            self.starved += 1
            return
        decisions.sort(key=lambda d: (-d.gain, d.ue_id))
        for decision in decisions[:self.max_handovers]:
            request_id = f"{self.xapp_id}:{tick:08d}:{decision.ue_id}"
            self.send(MsgType.TS_CONTROL, {
                "request_id": request_id,
                "ue_id": decision.ue_id,
                "target_cell": decision.target_cell,
                "priority": self.priority,
                "tick": tick,
            }, tick)
            self.decisions.append({
                "tick": tick,
                "ue_id": decision.ue_id,
                "target_cell": decision.target_cell,
                "reason": decision.reason,
            })
            self.stats["decisions"] += 1
