import math

import numpy as np
import pytest

import config
from agents.base import CELL_METRIC, TRAIN_SET, UE_METRIC, tick_key
from agents.model import N_FEATURES, LinearModel, featurize
from attacks.errors import InsufficientDataError
from attacks.ml import (
    DataPoisonAttack,
    MiaLeakAttack,
    evaluation_grid,
    fidelity,
    finite_difference,
    fit_surrogate,
    membership_score,
    perturbation_shift,
    poison_rows,
)
from attacks.platform_attacks import (
    E2MgrExploitAttack,
    FloodAttack,
    RouteHijackAttack,
    TamperAttack,
    mutate_prediction,
)
from attacks.registry import ATTACKERS, build_attacker
from attacks.types import AttackConfig, AttackKind, AttackOutcome
from ran.world import Cell, Ue, World
from ric.platform import RicPlatform
from ric.types import DefenceSettings, Message, MsgType, PlatformSettings, XAppDescriptor

PREDICTION = {"ue_id": "u1", "serving_cell": "A", "per_cell": {"A": 4.0, "B": 9.0, "C": 1.0}, "model_version": 2}


def make_platform(channel="plaintext", sub_window=128, **defences):
    world = World([Cell("A", (0.0, 0.0)), Cell("B", (500.0, 0.0))],
                  [Ue("u1", (100.0, 0.0), "A"), Ue("u2", (400.0, 0.0), "B")])
    defences.setdefault("zone_edges", config.ZONE_EDGES)
    return RicPlatform(world, PlatformSettings(channel=channel, sub_window_capacity=sub_window),
                       DefenceSettings(**defences), seed=3)


def attack(kind, attacker_id="mal", **fields):
    fields.setdefault("stop", 10)
    return AttackConfig(kind=kind, attacker_id=attacker_id, **fields)


def ue_record(ue_id, tick, serving="A", sinr=10.0):
    return {"ue_id": ue_id, "tick": tick, "serving_cell": serving, "sinr_serving": sinr,
            "rsrp_serving": -85.0, "prb_usage": 50.0, "throughput_dl": 12.0, "neighbours": [["B", -95.0]]}


# --- pure helpers ---

def test_membership_score():
    rows = [[0.0, 0.0], [3.0, 4.0]]
    assert membership_score([3.0, 4.0], rows) == 1.0
    assert membership_score([6.0, 8.0], rows) == pytest.approx(1.0 / 6.0)
    assert membership_score([1.0, 1.0], []) == 0.0


def test_surrogate_is_exact_on_general_position_probes():
    rng = np.random.default_rng(7)
    weights = rng.normal(size=N_FEATURES)
    X = rng.normal(0.0, 5.0, size=(12, N_FEATURES))
    pairs = [(list(x), float(x @ weights + 3.5)) for x in X]
    surrogate = fit_surrogate(pairs, version=4)
    assert np.allclose(surrogate.weights, weights, atol=1e-9)
    assert surrogate.bias == pytest.approx(3.5, abs=1e-9)
    assert (surrogate.training_row_count, surrogate.model_version) == (12, 4)
    with pytest.raises(InsufficientDataError):
        fit_surrogate(pairs[:1])


def test_fidelity_over_the_training_range_grid():
    ranges = ((0.0, 1.0),) * N_FEATURES
    victim = LinearModel((0.0,) * N_FEATURES, 5.0, 0.1, 10, feature_ranges=ranges)
    close = LinearModel((0.0,) * N_FEATURES, 5.3, 0.0, 10)
    far = LinearModel((0.0,) * N_FEATURES, 20.0, 0.0, 10)
    assert fidelity(close, victim) == 1.0
    assert fidelity(far, victim) == 0.0
    # both clamp to zero everywhere
    assert fidelity(LinearModel((0.0,) * N_FEATURES, -9.0, 0.0, 1),
                    LinearModel((0.0,) * N_FEATURES, -1.0, 0.0, 1, feature_ranges=ranges)) == 1.0
    with pytest.raises(InsufficientDataError):
        fidelity(close, far)
    assert evaluation_grid(((0.0, 1.0), (2.0, 4.0))).shape == (9, 2)


def test_finite_difference_avoids_clamped_sides():
    assert finite_difference(4.0, 5.0, 3.0) == pytest.approx(1.0)
    assert finite_difference(4.0, 6.0, 0.0, offset=2.0) == pytest.approx(1.0)
    assert finite_difference(4.0, 0.0, 3.0) == pytest.approx(1.0)
    assert finite_difference(0.0, 0.0, 0.0) is None
    assert finite_difference(0.0, None, None) is None


def test_poison_rows():
    rows = [{"label": 1.0, "features": [0.0]}, {"label": 2.0, "features": [1.0]}]
    rng = np.random.default_rng(0)
    shifted = poison_rows(rows, "label-shift", 1.0, 50.0, rng)
    assert [(i, r["label"]) for i, r in shifted] == [(0, 51.0), (1, 52.0)]
    assert rows[0]["label"] == 1.0
    injected = poison_rows(rows, "row-injection", 1.0, 10.0, rng, count=3)
    assert len(injected) == 3 and all(i is None for i, _ in injected)
    assert {r["label"] for _, r in injected} <= {11.0, 12.0}
    assert poison_rows(rows, "label-shift", 0.0, 50.0, rng) == []
    with pytest.raises(ValueError):
        poison_rows(rows, "flip", 1.0, 1.0, rng)


def test_perturbation_shift():
    features = [[0.0, 1.0], [1.0, 0.0], [2.0, 2.0], [3.0, 1.0]]
    labels = [1.0, 2.0, 4.0, 5.0]
    assert perturbation_shift(features, labels, [True, False, True, False], 0.0, 0.1, [1.0, 1.0]) == 0.0
    assert perturbation_shift(features, labels, [False] * 4, 7.0, 0.1, [1.0, 1.0]) == 0.0
    # every row inflated: only the unregularised bias moves
    assert perturbation_shift(features, labels, [True] * 4, 5.0, 0.1, [9.0, -3.0]) == pytest.approx(5.0)
    assert perturbation_shift(features, labels, [False, False, True, False], 5.0, 0.1, [2.0, 2.0]) > 0.0


def test_mutate_prediction():
    assert mutate_prediction(PREDICTION, "zero")["per_cell"] == {"A": 0.0, "B": 0.0, "C": 0.0}
    assert mutate_prediction(PREDICTION, "scale", 0.5)["per_cell"]["B"] == 4.5
    assert mutate_prediction(PREDICTION, "swap")["per_cell"] == {"A": 4.0, "B": 1.0, "C": 9.0}
    assert mutate_prediction(PREDICTION, "identity") is PREDICTION
    assert PREDICTION["per_cell"]["B"] == 9.0
    with pytest.raises(ValueError):
        mutate_prediction(PREDICTION, "invert")


# --- types ---

def test_attack_config_validation():
    with pytest.raises(ValueError):
        attack(AttackKind.RMR_FLOOD, intensity=-1.0)
    with pytest.raises(ValueError):
        attack(AttackKind.RMR_FLOOD, start=5, stop=5)
    cfg = attack(AttackKind.RMR_FLOOD, start=2, stop=4, intensity=0.0)
    assert [cfg.window(t) for t in range(5)] == [False, False, True, True, False]


def test_attack_outcome_bounds():
    with pytest.raises(ValueError):
        AttackOutcome(AttackKind.MIA_LEAK, "mal", "success", {"auc": 1.5})
    with pytest.raises(ValueError):
        AttackOutcome(AttackKind.RMR_FLOOD, "mal", "success", {"denial_rate": math.nan})
    with pytest.raises(ValueError):
        AttackOutcome(AttackKind.RMR_FLOOD, "mal", "success", {"issued": -1.0})
    outcome = AttackOutcome(AttackKind.MIA_POISON, "mal", "success", {"shift": -3.0, "auc": None})
    assert list(outcome.to_dict()["success_metric"]) == ["auc", "shift"]
    assert not outcome.blocked


def test_registry_covers_every_kind():
    assert set(ATTACKERS) == set(AttackKind)
    platform = make_platform()
    attacker = build_attacker(platform, attack(AttackKind.MIA_LEAK, target="u1",
                                               manifest={"namespaces": [["TrainSet", "read"]]}))
    assert isinstance(attacker, MiaLeakAttack)
    assert platform.descriptors["mal"].declared_namespaces == {"TrainSet"}


# --- attackers on a platform ---

def test_flood_fills_the_subscription_window():
    platform = make_platform(sub_window=4)
    platform.register_xapp(XAppDescriptor("kpimon", e2_subscribe=True))
    flood = FloodAttack(platform, attack(AttackKind.RMR_FLOOD, target="A", intensity=6))
    platform.begin_tick(0)
    flood.act(0)
    assert (flood.issued, flood.granted) == (6, 4)
    assert platform.e2_subscribe("kpimon", "A").status == "rejected"


def test_route_hijack_blackholes_on_an_open_platform():
    platform = make_platform()
    platform.register_xapp(XAppDescriptor("qoe"))
    platform.register_xapp(XAppDescriptor("ts"))
    platform.rmr_update_routes(config.ADMIN_ID, {"QOE_PREDICTION": "ts"}, platform.admin_token)
    hijack = RouteHijackAttack(platform, attack(AttackKind.ROUTE_HIJACK))
    platform.begin_tick(0)
    hijack.act(0)
    platform.rmr_send(Message(MsgType.QOE_PREDICTION, "qoe", PREDICTION, 0))
    hijack.relay(0)
    assert hijack.accepted_tick == 0
    assert hijack.observations["captured"] == 1 and hijack.observations["forwarded"] == 0
    assert platform.rmr_receive("ts") == []


def test_route_hijack_is_blocked_under_zero_trust():
    platform = make_platform(zero_trust=True)
    platform.register_xapp(XAppDescriptor("ts", zone="control"))
    hijack = RouteHijackAttack(platform, attack(AttackKind.ROUTE_HIJACK))
    platform.begin_tick(0)
    hijack.act(0)
    assert hijack.blocked_reason == "unauthenticated" and hijack.accepted_tick is None


def test_tamper_needs_a_plaintext_channel():
    secure = make_platform(channel="secure")
    tamper = TamperAttack(secure, attack(AttackKind.TAMPER, params={"mutation": "swap"}))
    tamper.act(0)
    assert tamper.blocked_reason == "secure-channel"
    with pytest.raises(ValueError):
        TamperAttack(make_platform(), attack(AttackKind.TAMPER, attacker_id="m2", params={"mutation": "melt"}))


def test_e2mgr_exploit_shuts_down_and_restarts():
    platform = make_platform()
    exploit = E2MgrExploitAttack(platform, attack(AttackKind.E2MGR_EXPLOIT, target="A", start=2, stop=4))
    for tick in range(5):
        platform.begin_tick(tick)
        exploit.act(tick)
        if tick == 3:
            assert not platform.world.cells["A"].online
    assert platform.world.cells["A"].online
    assert exploit.observations == {"node": "A", "shutdown_tick": 2, "restart_tick": 4}


def test_e2mgr_exploit_is_blocked_on_a_secure_platform():
    platform = make_platform(channel="secure")
    exploit = E2MgrExploitAttack(platform, attack(AttackKind.E2MGR_EXPLOIT, target="A"))
    exploit.act(0)
    assert exploit.blocked_reason == "secure-channel"
    assert platform.world.cells["A"].online


def seed_metrics(platform, tick):
    platform.register_xapp(XAppDescriptor("kpimon", namespaces=((UE_METRIC, "write"), (CELL_METRIC, "write"))))
    cells = {"A": {"cell_id": "A", "tick": tick, "connected_ue_count": 2, "load": 10.0,
                   "aggregate_throughput": 24.0}}
    platform.sdl_write("kpimon", CELL_METRIC, tick_key(tick, "A"), cells["A"])
    records = {ue_id: ue_record(ue_id, tick, sinr=sinr) for ue_id, sinr in (("u1", 10.0), ("u2", 4.0))}
    for ue_id, record in records.items():
        platform.sdl_write("kpimon", UE_METRIC, tick_key(tick, ue_id), record)
    return records, cells


def test_mia_leak_matches_residual_rows():
    platform = make_platform()
    records, cells = seed_metrics(platform, 4)
    platform.register_xapp(XAppDescriptor("qoe", namespaces=((TRAIN_SET, "write"),)))
    row = {"ue_id": "u1", "tick": 4, "features": list(featurize(records["u1"], cells).values), "label": 12.0}
    platform.sdl_write("qoe", TRAIN_SET, tick_key(4, "u1"), row)

    leak = MiaLeakAttack(platform, attack(AttackKind.MIA_LEAK, start=5, params={"candidates": ["u2", "u1"]}))
    leak.act(5)
    scores = leak.observations["scores"]
    assert scores["u1"] == 1.0
    assert scores["u2"] == pytest.approx(1.0 / 7.0)
    assert leak.observations["rows_scanned"] == 1


def test_mia_leak_is_blocked_by_least_privilege():
    platform = make_platform(access_control="least-privilege")
    seed_metrics(platform, 4)
    leak = MiaLeakAttack(platform, attack(AttackKind.MIA_LEAK, target="u1", start=5))
    leak.act(5)
    assert leak.blocked_reason and leak.blocked_tick == 5
    assert leak.observations == {}


def test_data_poison_shifts_staged_labels():
    platform = make_platform()
    platform.register_xapp(XAppDescriptor("qoe", namespaces=((TRAIN_SET, "write"),)))
    for ue_id in ("u1", "u2"):
        platform.sdl_write("qoe", TRAIN_SET, tick_key(3, ue_id),
                           {"ue_id": ue_id, "tick": 3, "features": [0.0] * N_FEATURES, "label": 2.0})
    poison = DataPoisonAttack(platform, attack(AttackKind.DATA_POISON, intensity=1.0, start=3, stop=4,
                                               params={"delta": 50.0}))
    poison.relay(3)
    record = platform.sdl.read(TRAIN_SET, tick_key(3, "u1"))
    assert record.value["label"] == 52.0 and record.writer == "mal"
    assert poison.poisoned == 2
    poison.relay(4)
    assert poison.poisoned == 2
