"""
Attacks on the Near-RT RIC platform itself: message tampering, E2
subscription flooding, routing-table hijack, the plaintext E2 manager API and
conflict-manager exhaustion.
"""

import logging
from typing import Callable, Dict, List, Optional

from agents.base import CELL_METRIC, UE_METRIC, tick_prefix
from attacks.base import Attacker
from attacks.types import AttackConfig, AttackKind
from ric.errors import AccessDeniedError, CapabilityUnavailableError
from ric.types import MsgType, RicControlRequest, XAppDescriptor

logger = logging.getLogger(__name__)

MUTATIONS = ("zero", "scale", "swap", "identity")


def mutate_prediction(payload: Dict, mutation: str, factor: float = 0.0) -> Dict:
    """Apply a named mutation to the per-cell predictions of a QOE_PREDICTION payload."""
    if mutation not in MUTATIONS:
        raise ValueError(f"unknown mutation {mutation!r}")
    per_cell = payload.get("per_cell")
    if not isinstance(per_cell, dict) or mutation == "identity" or not per_cell:
        return payload
    if mutation == "zero":
        mutated = {cell_id: 0.0 for cell_id in per_cell}
    elif mutation == "scale":
        mutated = {cell_id: float(v) * factor for cell_id, v in per_cell.items()}
    else:
        best = min(per_cell, key=lambda c: (-per_cell[c], c))
        worst = min(per_cell, key=lambda c: (per_cell[c], c))
        mutated = dict(per_cell)
        mutated[best], mutated[worst] = per_cell[worst], per_cell[best]
    return {**payload, "per_cell": mutated}


class TamperAttack(Attacker):
    """Installs an in-flight mutation on the plaintext RMR channel for the attack window."""

    kind = AttackKind.TAMPER

    def __init__(self, platform, config: AttackConfig, rng=None):
        super().__init__(platform, config, rng)
        params = self.params
        self.msg_types = [MsgType(t) for t in params.get("msg_types", [MsgType.QOE_PREDICTION.value])]
        self.mutation = params.get("mutation", "zero")
        self.factor = float(params.get("factor", config.intensity))
        if self.mutation not in MUTATIONS:
            raise ValueError(f"{config.attacker_id}: unknown mutation {self.mutation!r}")
        self.installed_at: Optional[int] = None

    def _mutator(self) -> Callable[[Dict], Dict]:
        def mutate(payload: Dict) -> Dict:
            if not self.config.window(self.platform.tick):
                return payload
            self.stats["mutated"] += 1
            return mutate_prediction(payload, self.mutation, self.factor)
        return mutate

    def act(self, tick: int) -> None:
        if self.installed_at is not None or not self.active(tick):
            return
        try:
            self.platform.intercept_channel(self.xapp_id, self.msg_types, self._mutator(), self.mutation)
        except CapabilityUnavailableError:
            self.block("secure-channel", tick)
            return
        except AccessDeniedError as e:
            self.block(e.reason, tick)
            return
        self.installed_at = tick
        self.observations = {"installed_at": tick, "mutation": self.mutation}


class FloodAttack(Attacker):
    """Issues `intensity` E2 subscription requests per tick ahead of the legitimate apps."""

    kind = AttackKind.RMR_FLOOD

    @classmethod
    def default_manifest(cls, cfg: AttackConfig) -> XAppDescriptor:
        # indistinguishable from a KPI collector
        return XAppDescriptor(
            xapp_id=cfg.attacker_id,
            receives=(MsgType.E2_REPORT.value,),
            e2_subscribe=True,
            zone="ingest",
        )

    def __init__(self, platform, config: AttackConfig, rng=None):
        super().__init__(platform, config, rng)
        self.rate = int(config.intensity)
        self.node = self.params.get("node", config.target) or sorted(platform.world.cells)[0]
        self.issued = 0
        self.granted = 0

    def act(self, tick: int) -> None:
        if self.platform.is_quarantined(self.xapp_id):
            return
        self.receive()
        if not self.active(tick):
            return
        for _ in range(self.rate):
            result = self.platform.e2_subscribe(self.xapp_id, self.node)
            self.issued += 1
            self.granted += int(result.ok)
        self.observations = {"issued": self.issued, "granted": self.granted, "node": self.node}


class RouteHijackAttack(Attacker):
    """
    Remaps one message type to itself with a forged routing update, then
    either swallows the traffic (blackhole) or forwards corrupted copies to
    the real consumer (corrupt).
    """

    kind = AttackKind.ROUTE_HIJACK

    def __init__(self, platform, config: AttackConfig, rng=None):
        super().__init__(platform, config, rng)
        params = self.params
        self.msg_type = MsgType(params.get("msg_type", config.target or MsgType.QOE_PREDICTION.value))
        self.mode = params.get("mode", "blackhole")
        if self.mode not in ("blackhole", "corrupt"):
            raise ValueError(f"{config.attacker_id}: unknown hijack mode {self.mode!r}")
        self.victim = params.get("victim", "ts")
        self.mutation = params.get("mutation", "swap")
        self.factor = float(params.get("factor", 0.0))
        self.attempted = False
        self.accepted_tick: Optional[int] = None
        self.captured = 0
        self.forwarded = 0

    @classmethod
    def default_manifest(cls, cfg: AttackConfig) -> XAppDescriptor:
        return XAppDescriptor(
            xapp_id=cfg.attacker_id,
            namespaces=((UE_METRIC, "read"),),
            zone="analytics",
        )

    def act(self, tick: int) -> None:
        if self.attempted or not self.active(tick):
            return
        self.attempted = True
        result = self.platform.rmr_update_routes(self.xapp_id, {self.msg_type.value: self.xapp_id}, self.token)
        if not result.accepted:
            self.block(result.reason, tick)
            return
        self.accepted_tick = tick
        logger.info("tick %d: %s now receives %s traffic", tick, self.xapp_id, self.msg_type.value)

    def relay(self, tick: int) -> None:
        if self.accepted_tick is None or self.platform.is_quarantined(self.xapp_id):
            return
        for message in self.receive():
            if message.msg_type != self.msg_type:
                continue
            self.captured += 1
            if self.mode == "corrupt":
                payload = mutate_prediction(message.payload, self.mutation, self.factor)
                if self.send(self.msg_type, payload, tick, destination=self.victim).ok:
                    self.forwarded += 1
        self.observations = {
            "accepted_tick": self.accepted_tick,
            "captured": self.captured,
            "forwarded": self.forwarded,
            "mode": self.mode,
        }


class E2MgrExploitAttack(Attacker):
    """Shuts an E2 node down over the plaintext E2 manager API and brings it back at `stop`."""

    kind = AttackKind.E2MGR_EXPLOIT

    def __init__(self, platform, config: AttackConfig, rng=None):
        super().__init__(platform, config, rng)
        self.node = self.params.get("node", config.target) or sorted(platform.world.cells)[0]
        self.restart = bool(self.params.get("restart", True))
        self.shutdown_tick: Optional[int] = None
        self.restart_tick: Optional[int] = None

    def act(self, tick: int) -> None:
        if self.shutdown_tick is None:
            if not self.active(tick) or self.blocked_reason:
                return
            if self.platform.e2mgr_admin(self.xapp_id, "shutdown", self.node, channel="plaintext") != "applied":
                self.block("secure-channel" if self.platform.settings.channel == "secure" else "denied", tick)
                return
            self.shutdown_tick = tick
        elif self.restart and self.restart_tick is None and tick >= self.config.stop:
            if self.platform.e2mgr_admin(self.xapp_id, "restart", self.node, channel="plaintext") == "applied":
                self.restart_tick = tick
        self.observations = {"node": self.node, "shutdown_tick": self.shutdown_tick,
                             "restart_tick": self.restart_tick}


class ConflictExhaustAttack(Attacker):
    """Floods the conflict manager with `intensity` random handover requests per tick."""

    kind = AttackKind.CONFLICT_EXHAUST

    @classmethod
    def default_manifest(cls, cfg: AttackConfig) -> XAppDescriptor:
        return XAppDescriptor(
            xapp_id=cfg.attacker_id,
            namespaces=((UE_METRIC, "read"), (CELL_METRIC, "read")),
            zone="control",
        )

    def __init__(self, platform, config: AttackConfig, rng=None):
        super().__init__(platform, config, rng)
        self.rate = int(config.intensity)
        self.priority = int(self.params.get("priority", 1))
        self.submitted = 0

    def act(self, tick: int) -> None:
        if not self.active(tick) or self.rate == 0 or tick == 0:
            return
        try:
            ues: List[str] = sorted(r.value["ue_id"] for r in
                                    self.platform.sdl_scan(self.xapp_id, UE_METRIC, tick_prefix(tick - 1)))
            cells: List[str] = sorted(r.value["cell_id"] for r in
                                      self.platform.sdl_scan(self.xapp_id, CELL_METRIC, tick_prefix(tick - 1)))
            if not ues or not cells:
                return
            for k in range(self.rate):
                self.platform.e2_control(RicControlRequest(
                    request_id=f"{self.xapp_id}:{tick:08d}:{k:04d}",
                    issuer=self.xapp_id,
                    ue_id=ues[int(self.rng.integers(len(ues)))],
                    target_cell=cells[int(self.rng.integers(len(cells)))],
                    priority=self.priority,
                    tick=tick,
                ))
                self.submitted += 1
        except AccessDeniedError as e:
            self.block(e.reason, tick)
            return
        self.observations = {"submitted": self.submitted}

