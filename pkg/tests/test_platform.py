import pytest

import config
from ran.world import Cell, Ue, World
from ric.errors import (
    AccessDeniedError,
    CapabilityUnavailableError,
    DuplicateRequestError,
    DuplicateXAppError,
    UnknownNodeError,
    UnknownXAppError,
)
from ric.platform import RicPlatform
from ric.types import DefenceSettings, Message, MsgType, PlatformSettings, RicControlRequest, XAppDescriptor

PREDICTION = {"ue_id": "u1", "serving_cell": "A", "per_cell": {"A": 1.0, "B": 2.0}, "model_version": 1}


def make_platform(channel="plaintext", **defences):
    world = World([Cell("A", (0.0, 0.0)), Cell("B", (500.0, 0.0))],
                  [Ue("u1", (100.0, 0.0), "A"), Ue("u2", (120.0, 0.0), "A")])
    defences.setdefault("zone_edges", config.ZONE_EDGES)
    return RicPlatform(world, PlatformSettings(channel=channel, sub_window_capacity=4),
                       DefenceSettings(**defences), seed=11)


def register(platform, xapp_id, **fields):
    return platform.register_xapp(XAppDescriptor(xapp_id=xapp_id, **fields))


def test_platform_identities_are_registered_at_start():
    platform = make_platform()
    assert platform.registered(config.ADMIN_ID) and platform.registered(config.E2TERM_ID)
    with pytest.raises(DuplicateXAppError):
        register(platform, config.ADMIN_ID)
    with pytest.raises(UnknownXAppError):
        platform.sdl_read("ghost", "UE-Metric", "k")


def test_every_operation_appends_one_audit_entry():
    platform = make_platform()
    register(platform, "x", namespaces=(("UE-Metric", "write"),))
    before = len(platform.audit)
    platform.sdl_write("x", "UE-Metric", "k", {"v": 1})
    platform.sdl_read("x", "UE-Metric", "k")
    platform.sdl_scan("x", "UE-Metric")
    entries = platform.audit_since(before)
    assert [(e.op, e.verdict) for e in entries] == [("sdl_write", "allow"), ("sdl_read", "allow"), ("sdl_scan", "allow")]
    assert entries[2].detail["count"] == 1
    assert platform.audit_ndjson().count("\n") == len(platform.audit)


def test_allow_all_lets_undeclared_access_through():
    platform = make_platform()
    register(platform, "x")
    platform.sdl_write("x", "TrainSet", "k", {"v": 1})
    assert platform.sdl_read("x", "TrainSet", "k").writer == "x"


def test_least_privilege_denies_undeclared_namespace():
    platform = make_platform(access_control="least-privilege")
    register(platform, "reader", namespaces=(("UE-Metric", "read"),))
    assert platform.sdl_scan("reader", "UE-Metric") == []
    with pytest.raises(AccessDeniedError) as denied:
        platform.sdl_scan("reader", "TrainSet")
    assert denied.value.reason
    with pytest.raises(AccessDeniedError):
        platform.sdl_write("reader", "UE-Metric", "k", {})
    assert platform.audit[-1].verdict == "deny"


def test_send_routes_through_the_table():
    platform = make_platform()
    register(platform, "qoe", sends=(MsgType.QOE_PREDICTION.value,), zone="analytics")
    register(platform, "ts", receives=(MsgType.QOE_PREDICTION.value,), zone="control")
    dropped = platform.rmr_send(Message(MsgType.QOE_PREDICTION, "qoe", PREDICTION, 0))
    assert not dropped.ok and dropped.reason == "no-route"
    platform.rmr_update_routes(config.ADMIN_ID, {"QOE_PREDICTION": "ts"}, platform.admin_token)
    assert platform.rmr_send(Message(MsgType.QOE_PREDICTION, "qoe", PREDICTION, 0)).ok
    assert [m.payload for m in platform.rmr_receive("ts")] == [PREDICTION]


def test_malformed_payload_is_dropped():
    platform = make_platform()
    register(platform, "qoe")
    register(platform, "ts")
    platform.rmr_update_routes(config.ADMIN_ID, {"QOE_PREDICTION": "ts"}, platform.admin_token)
    result = platform.rmr_send(Message(MsgType.QOE_PREDICTION, "qoe", {"ue_id": "u1"}, 0))
    assert result.reason == "malformed"


def test_queue_capacity_drops_overflow():
    platform = make_platform()
    platform.inboxes.capacity = 2
    register(platform, "qoe")
    register(platform, "ts")
    platform.rmr_update_routes(config.ADMIN_ID, {"QOE_PREDICTION": "ts"}, platform.admin_token)
    results = [platform.rmr_send(Message(MsgType.QOE_PREDICTION, "qoe", PREDICTION, 0)) for _ in range(3)]
    assert [r.ok for r in results] == [True, True, False]
    assert results[2].reason == "queue-full"


def test_open_platform_accepts_forged_route_updates():
    platform = make_platform()
    register(platform, "ts")
    register(platform, "mal")
    platform.rmr_update_routes(config.ADMIN_ID, {"QOE_PREDICTION": "ts"}, platform.admin_token)
    result = platform.rmr_update_routes("mal", {"QOE_PREDICTION": "mal"})
    assert result.accepted
    assert platform.routes.resolve(MsgType.QOE_PREDICTION) == "mal"
    assert platform.alerts == []


def test_zero_trust_rejects_forged_route_updates_with_one_alert():
    platform = make_platform(zero_trust=True)
    register(platform, "ts")
    _, token = register(platform, "mal")
    assert platform.rmr_update_routes(config.ADMIN_ID, {"QOE_PREDICTION": "ts"}, platform.admin_token).accepted
    result = platform.rmr_update_routes("mal", {"QOE_PREDICTION": "mal"}, token)
    assert not result.accepted and result.reason == "unauthenticated"
    assert platform.routes.resolve(MsgType.QOE_PREDICTION) == "ts"
    assert [(a.subject, a.rule) for a in platform.alerts] == [("mal", "forged-route-update")]


def test_zero_trust_checks_tokens_and_zones():
    platform = make_platform(zero_trust=True)
    _, qoe_token = register(platform, "qoe", zone="analytics")
    _, rapp_token = register(platform, "rapp", zone="policy")
    register(platform, "ts", zone="control")
    register(platform, "kpimon", zone="ingest")
    platform.rmr_update_routes(config.ADMIN_ID, {"QOE_PREDICTION": "ts"}, platform.admin_token)
    assert platform.rmr_send(Message(MsgType.QOE_PREDICTION, "qoe", PREDICTION, 0, qoe_token)).ok
    # wrong token for the claimed sender
    assert platform.rmr_send(Message(MsgType.QOE_PREDICTION, "qoe", PREDICTION, 0, rapp_token)).reason == "unauthorized"
    # control -> ingest is not a permitted segment
    _, ts_token = platform.register_xapp(XAppDescriptor("ts2", zone="control"))
    reply = platform.rmr_send(Message(MsgType.QOE_PREDICTION, "ts2", PREDICTION, 0, ts_token), destination="kpimon")
    assert reply.reason == "unauthorized"


def test_interception_needs_a_plaintext_channel():
    platform = make_platform()
    register(platform, "qoe")
    register(platform, "ts")
    register(platform, "mal")
    platform.rmr_update_routes(config.ADMIN_ID, {"QOE_PREDICTION": "ts"}, platform.admin_token)
    platform.intercept_channel("mal", [MsgType.QOE_PREDICTION],
                               lambda p: {**p, "per_cell": {"A": 0.0, "B": 0.0}}, "zero")
    platform.rmr_send(Message(MsgType.QOE_PREDICTION, "qoe", PREDICTION, 0))
    (message,) = platform.rmr_receive("ts")
    assert message.payload["per_cell"] == {"A": 0.0, "B": 0.0}
    assert PREDICTION["per_cell"] == {"A": 1.0, "B": 2.0}

    secure = make_platform(channel="secure")
    register(secure, "mal")
    with pytest.raises(CapabilityUnavailableError):
        secure.intercept_channel("mal", [MsgType.QOE_PREDICTION], lambda p: p)


def test_subscription_window_and_report_delivery():
    platform = make_platform()
    register(platform, "kpimon", receives=(MsgType.E2_REPORT.value,), e2_subscribe=True, zone="ingest")
    register(platform, "mal", e2_subscribe=True)
    platform.begin_tick(0)
    assert all(platform.e2_subscribe("mal", "A").ok for _ in range(4))
    assert platform.e2_subscribe("kpimon", "A").status == "rejected"
    with pytest.raises(UnknownNodeError):
        platform.e2_subscribe("kpimon", "Z")

    platform.begin_tick(1)
    assert platform.e2_subscribe("kpimon", "A").status == "accepted"
    emission = platform.world.step()
    emission.tick = 1
    platform.deliver_e2_reports(emission)
    (report,) = platform.rmr_receive("kpimon")
    assert report.payload["node"] == "A"
    assert sorted(m["ue_id"] for m in report.payload["ue_metrics"]) == ["u1", "u2"]


def test_offline_node_sends_no_reports():
    platform = make_platform()
    register(platform, "kpimon", receives=(MsgType.E2_REPORT.value,), e2_subscribe=True, zone="ingest")
    platform.begin_tick(0)
    assert platform.e2_subscribe("kpimon", "A").ok and platform.e2_subscribe("kpimon", "B").ok
    platform.world.set_online("A", False)
    emission = platform.world.step()
    assert platform.deliver_e2_reports(emission) == 1
    assert [m.payload["node"] for m in platform.rmr_receive("kpimon")] == ["B"]


def test_conflict_budget_and_latency():
    platform = make_platform()
    platform.conflicts.budget = 1
    register(platform, "rc", e2_control=True)
    platform.begin_tick(5)
    platform.e2_control(RicControlRequest("r1", "rc", "u1", "B", 5, 5))
    platform.e2_control(RicControlRequest("r2", "rc", "u2", "B", 5, 5))
    with pytest.raises(DuplicateRequestError):
        platform.e2_control(RicControlRequest("r1", "rc", "u2", "B", 5, 5))
    first = platform.resolve_controls()
    platform.begin_tick(6)
    second = platform.resolve_controls()
    assert [(o.request_id, o.latency_ticks) for o in first + second] == [("r1", 1), ("r2", 2)]
    assert platform.world.ues["u1"].serving_cell == "B"
    assert [h.ue_id for h in platform.handovers if h.applied] == ["u1", "u2"]


def test_e2mgr_plaintext_vs_secure():
    platform = make_platform()
    register(platform, "mal")
    assert platform.e2mgr_admin("mal", "shutdown", "A", channel="plaintext") == "applied"
    assert not platform.world.cells["A"].online
    assert platform.e2mgr_admin("mal", "restart", "A") == "applied"

    secure = make_platform(channel="secure")
    register(secure, "mal")
    assert secure.e2mgr_admin("mal", "shutdown", "A", channel="plaintext") == "denied"
    assert secure.world.cells["A"].online
    assert secure.e2mgr_admin(config.ADMIN_ID, "shutdown", "A", token=secure.admin_token) == "applied"


def test_quarantine_isolates_and_restores():
    platform = make_platform()
    register(platform, "ts")
    register(platform, "mal", e2_control=True)
    platform.rmr_update_routes(config.ADMIN_ID, {"QOE_PREDICTION": "ts"}, platform.admin_token)
    platform.rmr_update_routes("mal", {"QOE_PREDICTION": "mal"})
    platform.intercept_channel("mal", [MsgType.QOE_PREDICTION], lambda p: p)
    platform.e2_control(RicControlRequest("m1", "mal", "u1", "B", 9, 0))
    platform.begin_tick(3)

    assert platform.quarantine("mal", "manual")
    assert not platform.quarantine("mal", "manual")
    assert platform.quarantined == {"mal": 3}
    assert platform.routes.resolve(MsgType.QOE_PREDICTION) == "ts"
    assert platform.interceptors == []
    assert [o.verdict for o in platform.control_log] == ["purged"]
    with pytest.raises(AccessDeniedError):
        platform.sdl_read("mal", "UE-Metric", "k")
    assert platform.rmr_receive("mal") == []
    assert not platform.rmr_update_routes("mal", {"QOE_PREDICTION": "mal"}).accepted


def test_auto_quarantine_on_alert():
    platform = make_platform(auto_quarantine=True)
    register(platform, "mal")
    alert = platform.raise_alert("mal", "rate-anomaly", 12.0)
    assert alert.action == "quarantine" and platform.is_quarantined("mal")
    assert platform.raise_alert(config.ADMIN_ID, "rate-anomaly", 12.0).action == "none"
