"""
Near-RT RIC platform facade.

Every xApp-facing operation is gated here (registration, quarantine, access
control, zero trust) and appends exactly one entry to the audit trace. With
all defences off the platform keeps the open behaviour of a stock deployment:
any registered caller may read/write any SDL namespace, update routes and use
the plaintext E2 manager channel.
"""

import copy
import json
import logging
import time
from collections import defaultdict
from typing import Callable, Dict, Iterable, List, Mapping, Optional, Tuple

import numpy as np

import config
from defences.access import AccessPolicy, compile_least_privilege, policy_check
from defences.monitor import AlertEvent
from defences.zero_trust import IdentityToken, TokenAuthority, ZoneGraph, segment_check
from ran.errors import RanError
from ran.world import HandoverResult, StepEmission, World
from ric.conflict import ConflictManager
from ric.e2 import E2Manager
from ric.errors import (
    AccessDeniedError,
    CapabilityUnavailableError,
    DuplicateRequestError,
    DuplicateXAppError,
    InvalidRequestError,
    UnknownNodeError,
    UnknownXAppError,
)
from ric.rmr import Inboxes, Interceptor, RoutingTable, parse_route_entries
from ric.sdl import SharedDataLayer
from ric.types import (
    AuditEntry,
    ControlOutcome,
    DefenceSettings,
    Delivered,
    Dropped,
    Message,
    PLATFORM_IDS,
    MsgType,
    PlatformSettings,
    RicControlRequest,
    RouteUpdateResult,
    SdlRecord,
    SubscribeResult,
    XAppDescriptor,
    payload_hash,
    payload_valid,
)

logger = logging.getLogger(__name__)

ADMIN_DESCRIPTOR = XAppDescriptor(
    xapp_id=config.ADMIN_ID,
    sends=(MsgType.ROUTE_UPDATE.value,),
    route_update=True,
    zone="platform",
)
E2TERM_DESCRIPTOR = XAppDescriptor(
    xapp_id=config.E2TERM_ID,
    sends=(MsgType.E2_REPORT.value,),
    zone="platform",
)


class RicPlatform:
    """
    SDL + RMR + E2 manager + conflict manager with the defence layers inline.

    Args:
        world: RAN the E2 interface talks to
        settings: capacities, conflict policy and channel security
        defences: access-control mode and zero-trust/detection toggles
        seed: run seed (derives the token key)
        token_rng: generator for token nonces
    """

    def __init__(self, world: World, settings: PlatformSettings = None,
                 defences: DefenceSettings = None, seed: int = 0,
                 token_rng: Optional[np.random.Generator] = None):
        self.world = world
        self.settings = settings or PlatformSettings()
        self.defences = defences or DefenceSettings()
        self.tick = 0

        self.sdl = SharedDataLayer()
        self.routes = RoutingTable()
        self.inboxes = Inboxes(self.settings.queue_capacity)
        self.e2 = E2Manager(self.settings.sub_window_capacity, self.settings.lease_ticks)
        self.conflicts = ConflictManager(self.settings.conflict_budget, self.settings.conflict_policy)
        self.tokens = TokenAuthority.from_seed(seed, token_rng or np.random.default_rng(seed))
        self.zones = ZoneGraph.from_edges(self.defences.zone_edges)
        self.policy = AccessPolicy("allow-all")

        self.descriptors: Dict[str, XAppDescriptor] = {}
        self.audit: List[AuditEntry] = []
        self.alerts: List[AlertEvent] = []
        self.quarantined: Dict[str, int] = {}
        self.interceptors: List[Interceptor] = []
        self.control_log: List[ControlOutcome] = []
        self.handovers: List[HandoverResult] = []
        self._submit_ticks: Dict[str, int] = {}
        self.defence_seconds = 0.0

        _, self.admin_token = self.register_xapp(ADMIN_DESCRIPTOR)
        _, self.e2term_token = self.register_xapp(E2TERM_DESCRIPTOR)

    # ------------------------------------------------------------------
    # Bookkeeping
    # ------------------------------------------------------------------

    def _audit(self, caller: str, op: str, resource: str, verdict: str, **detail) -> AuditEntry:
        entry = AuditEntry(self.tick, caller, op, resource, verdict, detail)
        self.audit.append(entry)
        return entry

    def _require_registered(self, caller: str, op: str, resource: str) -> None:
        if caller not in self.descriptors:
            self._audit(caller, op, resource, "error", reason="unknown-caller")
            raise UnknownXAppError(f"{caller} is not registered")

    def _deny_reason(self, caller: str, action: str, resource: str) -> Optional[str]:
        """None when allowed, else the denial reason."""
        if caller in self.quarantined:
            return "quarantined"
        if self.policy.mode == "allow-all":
            return None
        started = time.perf_counter()
        allowed = policy_check(self.policy, caller, resource, action)
        self.defence_seconds += time.perf_counter() - started
        return None if allowed else "access-control"

    def registered(self, xapp_id: str) -> bool:
        return xapp_id in self.descriptors

    def descriptor(self, xapp_id: str) -> XAppDescriptor:
        try:
            return self.descriptors[xapp_id]
        except KeyError:
            raise UnknownXAppError(f"{xapp_id} is not registered") from None

    def is_quarantined(self, xapp_id: str) -> bool:
        return xapp_id in self.quarantined

    def begin_tick(self, tick: int) -> None:
        self.tick = tick
        self.e2.begin_window()
        self.e2.expire(tick)

    def audit_since(self, index: int) -> List[AuditEntry]:
        return self.audit[index:]

    def audit_ndjson(self) -> str:
        return "".join(json.dumps(e.to_dict(), sort_keys=True, default=str) + "\n" for e in self.audit)

    # ------------------------------------------------------------------
    # Registry
    # ------------------------------------------------------------------

    def register_xapp(self, descriptor: XAppDescriptor) -> Tuple[str, IdentityToken]:
        """
        Register an xApp and issue its identity token.

        Raises:
            DuplicateXAppError: id already registered
        """
        xapp_id = descriptor.xapp_id
        if xapp_id in self.descriptors:
            self._audit(xapp_id, "register", xapp_id, "error", reason="duplicate")
            raise DuplicateXAppError(f"{xapp_id} already registered")
        self.descriptors[xapp_id] = descriptor
        if self.defences.access_control == "least-privilege":
            self.policy = compile_least_privilege(self.descriptors.values())
        self.zones.assign(xapp_id, descriptor.zone)
        self.inboxes.open(xapp_id)
        token = self.tokens.issue(xapp_id)
        self._audit(xapp_id, "register", xapp_id, "ok", zone=descriptor.zone)
        logger.debug("registered %s (zone %s)", xapp_id, descriptor.zone)
        return xapp_id, token

    # ------------------------------------------------------------------
    # SDL
    # ------------------------------------------------------------------

    def sdl_read(self, caller: str, namespace: str, key: str) -> Optional[SdlRecord]:
        resource = f"{namespace}/{key}"
        self._require_registered(caller, "sdl_read", resource)
        reason = self._deny_reason(caller, "sdl:read", namespace)
        if reason:
            self._audit(caller, "sdl_read", resource, "deny", namespace=namespace, reason=reason)
            raise AccessDeniedError(caller, "sdl_read", namespace, reason)
        record = self.sdl.read(namespace, key)
        self._audit(caller, "sdl_read", resource, "allow", namespace=namespace, count=int(record is not None))
        return record

    def sdl_write(self, caller: str, namespace: str, key: str, value: Dict) -> int:
        resource = f"{namespace}/{key}"
        self._require_registered(caller, "sdl_write", resource)
        reason = self._deny_reason(caller, "sdl:write", namespace)
        if reason:
            self._audit(caller, "sdl_write", resource, "deny", namespace=namespace, reason=reason)
            raise AccessDeniedError(caller, "sdl_write", namespace, reason)
        version = self.sdl.write(namespace, key, value, caller, self.tick)
        self._audit(caller, "sdl_write", resource, "allow", namespace=namespace, version=version)
        return version

    def sdl_scan(self, caller: str, namespace: str, key_prefix: str = "",
                 last: Optional[int] = None) -> List[SdlRecord]:
        resource = f"{namespace}/{key_prefix}*"
        self._require_registered(caller, "sdl_scan", resource)
        reason = self._deny_reason(caller, "sdl:read", namespace)
        if reason:
            self._audit(caller, "sdl_scan", resource, "deny", namespace=namespace, reason=reason)
            raise AccessDeniedError(caller, "sdl_scan", namespace, reason)
        records = self.sdl.scan(namespace, key_prefix, last)
        self._audit(caller, "sdl_scan", resource, "allow", namespace=namespace, count=len(records))
        return records

    # ------------------------------------------------------------------
    # RMR
    # ------------------------------------------------------------------

    def rmr_update_routes(self, sender: str, new_entries: Mapping,
                          token: Optional[IdentityToken] = None) -> RouteUpdateResult:
        self._require_registered(sender, "rmr_update_routes", "routes")
        generation = self.routes.generation

        def reject(reason: str) -> RouteUpdateResult:
            self._audit(sender, "rmr_update_routes", "routes", "rejected",
                        reason=reason, generation=generation)
            return RouteUpdateResult(False, generation, reason)

        if sender in self.quarantined:
            return reject("quarantined")
        parsed = parse_route_entries(new_entries)
        if parsed is None or any(e not in self.descriptors for e in parsed.values()):
            return reject("malformed")
        reason = self._deny_reason(sender, "route:update", "*")
        if reason:
            return reject(reason)
        if self.defences.zero_trust:
            started = time.perf_counter()
            authentic = sender == config.ADMIN_ID and self.tokens.verify(token, sender)
            self.defence_seconds += time.perf_counter() - started
            if not authentic:
                result = reject("unauthenticated")
                self.raise_alert(sender, "forged-route-update", 1.0)
                logger.info("tick %d: route update from %s rejected by zero trust", self.tick, sender)
                return result

        by_admin = sender == config.ADMIN_ID
        generation = self.routes.apply(parsed, sender, by_admin=by_admin)
        self._audit(sender, "rmr_update_routes", "routes", "accepted",
                    entries={m.value: e for m, e in sorted(parsed.items())},
                    admin=by_admin, generation=generation)
        if not by_admin:
            logger.info("tick %d: routes updated by non-admin %s: %s", self.tick, sender,
                        {m.value: e for m, e in parsed.items()})
        return RouteUpdateResult(True, generation)

    def rmr_send(self, msg: Message, destination: Optional[str] = None):
        """
        Route `msg` and enqueue it on the destination inbox.

        `destination` bypasses the routing table (reply style) but not the
        zero-trust checks. Returns Delivered or Dropped.
        """
        msg_type = msg.msg_type
        resource = getattr(msg_type, "value", str(msg_type))
        self._require_registered(msg.sender, "rmr_send", resource)

        def drop(reason: str, to: Optional[str] = None) -> Dropped:
            self._audit(msg.sender, "rmr_send", resource, "dropped", reason=reason, to=to,
                        explicit=destination is not None)
            return Dropped(reason)

        if msg.sender in self.quarantined:
            return drop("quarantined")
        if not isinstance(msg_type, MsgType) or not payload_valid(msg_type, msg.payload):
            return drop("malformed")
        to = destination if destination is not None else self.routes.resolve(msg_type)
        if to is None or to not in self.descriptors:
            return drop("no-route", to)
        if to in self.quarantined:
            return drop("quarantined", to)
        if (self._deny_reason(msg.sender, "msg:send", resource)
                or self._deny_reason(to, "msg:receive", resource)):
            return drop("unauthorized", to)
        if self.defences.zero_trust:
            started = time.perf_counter()
            verified = self.tokens.verify(msg.token, msg.sender)
            segmented = msg.sender in PLATFORM_IDS or segment_check(self.zones, msg.sender, to)
            self.defence_seconds += time.perf_counter() - started
            if not (verified and segmented):
                return drop("unauthorized", to)

        payload = msg.payload
        intercepted = []
        if self.settings.channel == "plaintext":
            for interceptor in self.interceptors:
                if interceptor.matches(msg_type) and interceptor.owner not in self.quarantined:
                    payload = interceptor.mutation(copy.deepcopy(payload))
                    intercepted.append(interceptor.owner)
        detail = {"to": to, "explicit": destination is not None}
        if intercepted:
            detail.update(intercepted_by=intercepted, original_hash=payload_hash(msg.payload),
                          mutated_hash=payload_hash(payload))
        if not payload_valid(msg_type, payload):
            return drop("malformed", to)

        delivered = Message(msg_type, msg.sender, payload, msg.tick, msg.token)
        result = self.inboxes.enqueue(to, delivered)
        if isinstance(result, Dropped):
            self._audit(msg.sender, "rmr_send", resource, "dropped", reason=result.reason, **detail)
            return result
        self._audit(msg.sender, "rmr_send", resource, "delivered", **detail)
        return result

    def rmr_receive(self, xapp_id: str) -> List[Message]:
        """Drain the caller's inbox."""
        self._require_registered(xapp_id, "rmr_receive", xapp_id)
        if xapp_id in self.quarantined:
            self._audit(xapp_id, "rmr_receive", xapp_id, "deny", reason="quarantined")
            return []
        messages = self.inboxes.drain(xapp_id)
        self._audit(xapp_id, "rmr_receive", xapp_id, "ok", count=len(messages))
        return messages

    def intercept_channel(self, caller: str, msg_filter: Iterable[MsgType],
                          mutation: Callable[[Dict], Dict], name: str = "custom") -> Interceptor:
        """
        Install a mutation on in-flight messages of the filtered types.

        Raises:
            CapabilityUnavailableError: channel is secure
            AccessDeniedError: caller quarantined
        """
        self._require_registered(caller, "intercept_channel", "channel")
        types = frozenset(msg_filter)
        if caller in self.quarantined:
            self._audit(caller, "intercept_channel", "channel", "deny", reason="quarantined")
            raise AccessDeniedError(caller, "intercept_channel", "channel", "quarantined")
        if self.settings.channel == "secure":
            self._audit(caller, "intercept_channel", "channel", "unavailable")
            raise CapabilityUnavailableError("channel is secure, interception unavailable")
        interceptor = Interceptor(caller, types, mutation, name)
        self.interceptors.append(interceptor)
        self._audit(caller, "intercept_channel", "channel", "applied",
                    msg_types=sorted(t.value for t in types), mutation=name)
        return interceptor

    # ------------------------------------------------------------------
    # E2
    # ------------------------------------------------------------------

    def _require_node(self, caller: str, op: str, node: str) -> None:
        if node not in self.world.cells:
            self._audit(caller, op, node, "error", reason="unknown-node")
            raise UnknownNodeError(f"unknown E2 node {node}")

    def e2_subscribe(self, caller: str, node: str, report_period: int = 1) -> SubscribeResult:
        self._require_registered(caller, "e2_subscribe", node)
        self._require_node(caller, "e2_subscribe", node)
        if report_period < 1:
            self._audit(caller, "e2_subscribe", node, "error", reason="bad-period")
            raise InvalidRequestError(f"report_period must be >= 1, got {report_period}")
        reason = self._deny_reason(caller, "e2:subscribe", "*")
        if reason:
            self._audit(caller, "e2_subscribe", node, "rejected", reason=reason)
            return SubscribeResult("rejected", reason=reason)
        result = self.e2.subscribe(caller, node, report_period, self.tick)
        self._audit(caller, "e2_subscribe", node, result.status,
                    reason=result.reason, sub_id=result.sub_id)
        return result

    def deliver_e2_reports(self, emission: StepEmission) -> int:
        """Send each due subscription an E2_REPORT for its online node. Returns delivered count."""
        by_node = defaultdict(list)
        for metrics in emission.ue_metrics:
            by_node[metrics.serving_cell].append(metrics.to_dict())
        delivered = 0
        for cell_metrics in emission.cell_metrics:
            if not cell_metrics.online:
                continue
            node = cell_metrics.cell_id
            for sub in self.e2.reporting(node, emission.tick):
                if sub.subscriber in self.quarantined:
                    continue
                payload = {
                    "node": node,
                    "tick": emission.tick,
                    "ue_metrics": by_node.get(node, []),
                    "cell_metrics": cell_metrics.to_dict(),
                }
                message = Message(MsgType.E2_REPORT, config.E2TERM_ID, payload, emission.tick,
                                  self.e2term_token)
                if isinstance(self.rmr_send(message, destination=sub.subscriber), Delivered):
                    delivered += 1
        return delivered

    def e2_control(self, request: RicControlRequest) -> str:
        """
        Queue a control request for conflict resolution.

        Raises:
            AccessDeniedError: issuer quarantined or lacks the control grant
            DuplicateRequestError: request_id already used in this run
        """
        resource = request.ue_id
        self._require_registered(request.issuer, "e2_control", resource)
        reason = self._deny_reason(request.issuer, "e2:control", "*")
        if reason:
            self._audit(request.issuer, "e2_control", resource, "deny", reason=reason)
            raise AccessDeniedError(request.issuer, "e2_control", resource, reason)
        if not self.conflicts.submit(request):
            self._audit(request.issuer, "e2_control", resource, "error", reason="duplicate")
            raise DuplicateRequestError(f"duplicate request id {request.request_id}")
        self._submit_ticks[request.request_id] = self.tick
        self._audit(request.issuer, "e2_control", resource, "queued",
                    request_id=request.request_id, target=request.target_cell)
        return "queued"

    def resolve_controls(self) -> List[ControlOutcome]:
        """Run one conflict-manager tick and apply accepted handovers to the RAN."""
        accepted, rejected, spilled = self.conflicts.resolve_tick()
        outcomes = []
        for request in accepted:
            try:
                result = self.world.execute_handover(request.ue_id, request.target_cell)
                self.handovers.append(result)
                ran_status = result.status
            except RanError as e:
                logger.warning("tick %d: control %s failed in RAN: %s", self.tick, request.request_id, e)
                ran_status = f"error:{type(e).__name__}"
            outcomes.append(self._outcome(request, "accepted", ran_status))
        for request in rejected:
            outcomes.append(self._outcome(request, "rejected-conflict"))
        if spilled:
            logger.debug("tick %d: %d control requests spilled", self.tick, spilled)
        self.control_log.extend(outcomes)
        return outcomes

    def _outcome(self, request: RicControlRequest, verdict: str, ran_status: str = "") -> ControlOutcome:
        return ControlOutcome(
            request_id=request.request_id,
            issuer=request.issuer,
            ue_id=request.ue_id,
            target_cell=request.target_cell,
            submit_tick=self._submit_ticks.pop(request.request_id, request.tick),
            resolve_tick=self.tick,
            verdict=verdict,
            ran_status=ran_status,
        )

    def e2mgr_admin(self, caller: str, action: str, node: str,
                    token: Optional[IdentityToken] = None, channel: Optional[str] = None) -> str:
        """
        Shut down or restart an E2 node through the E2 manager API.

        A secure platform exposes no plaintext endpoint, so `channel` can only
        downgrade to plaintext when the platform itself runs plaintext.
        """
        self._require_registered(caller, "e2mgr_admin", node)
        self._require_node(caller, "e2mgr_admin", node)
        if action not in ("shutdown", "restart"):
            self._audit(caller, "e2mgr_admin", node, "error", reason="bad-action")
            raise InvalidRequestError(f"unknown admin action {action!r}")
        effective = "secure" if self.settings.channel == "secure" else (channel or "plaintext")
        if caller in self.quarantined:
            self._audit(caller, "e2mgr_admin", node, "denied", action=action, reason="quarantined")
            return "denied"
        if effective == "secure":
            started = time.perf_counter()
            authentic = caller == config.ADMIN_ID and self.tokens.verify(token, caller)
            self.defence_seconds += time.perf_counter() - started
            if not authentic:
                self._audit(caller, "e2mgr_admin", node, "denied", action=action, channel=effective)
                return "denied"
        self.world.set_online(node, action == "restart")
        self._audit(caller, "e2mgr_admin", node, "applied", action=action, channel=effective)
        logger.info("tick %d: %s applied %s on %s over %s channel", self.tick, caller, action, node, effective)
        return "applied"

    # ------------------------------------------------------------------
    # Response
    # ------------------------------------------------------------------

    def quarantine(self, xapp_id: str, reason: str = "manual") -> bool:
        """
        Isolate an xApp. Returns False if it was already quarantined.

        Raises:
            UnknownXAppError: xapp_id not registered
        """
        self._require_registered(xapp_id, "quarantine", xapp_id)
        if xapp_id in self.quarantined:
            self._audit(config.ADMIN_ID, "quarantine", xapp_id, "noop", reason=reason)
            return False
        self.quarantined[xapp_id] = self.tick
        drained = len(self.inboxes.drain(xapp_id))
        purged = self.conflicts.purge(xapp_id)
        for request in purged:
            self.control_log.append(self._outcome(request, "purged"))
        self.interceptors = [i for i in self.interceptors if i.owner != xapp_id]
        restored = self.routes.restore_from(xapp_id)
        self.e2.cancel_owner(xapp_id)
        self._audit(config.ADMIN_ID, "quarantine", xapp_id, "applied", reason=reason,
                    drained=drained, purged=len(purged), restored=[m.value for m in restored])
        logger.info("tick %d: quarantined %s (%s)", self.tick, xapp_id, reason)
        return True

    def raise_alert(self, subject: str, rule: str, score: float, quarantinable: bool = True) -> AlertEvent:
        """Record an alert; quarantines the subject when auto-quarantine is on."""
        auto = quarantinable and self.defences.auto_quarantine and subject not in PLATFORM_IDS
        alert = AlertEvent(
            tick=self.tick,
            subject=subject,
            rule=rule,
            score=score,
            action="quarantine" if auto and subject not in self.quarantined else "none",
        )
        self.alerts.append(alert)
        logger.info("tick %d: alert %s on %s (score %.2f)", self.tick, rule, subject, score)
        if alert.action == "quarantine":
            self.quarantine(subject, reason=rule)
        return alert
