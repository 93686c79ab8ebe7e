import math

import numpy as np
import pytest

import config
from agents.anomaly import AnomalyDetector, ad_detect
from agents.base import CELL_METRIC, MODEL_STORE, QOE_PREDICTION, TRAIN_SET, UE_METRIC, tick_key, tick_prefix
from agents.errors import InsufficientWindowError, NoDataError, SchemaMismatchError, SingularSystemError
from agents.kpimon import KpiMonitor
from agents.model import (
    N_FEATURES,
    FeatureVector,
    LinearModel,
    candidate_vectors,
    featurize,
    lstsq_fit,
    qoe_featurize,
    qoe_train,
    ridge_fit,
)
from agents.observer import Observer
from agents.qoe import QoePredictor
from agents.rapp import A1Policy, PolicyRApp, rapp_generate_policies
from agents.rc import RanControl
from agents.ts import TrafficSteering, merge_preferences, ts_decide
from ran.radio import sinr_from_powers
from ran.world import Cell, Ue, World
from ric.platform import RicPlatform
from ric.types import Message, MsgType, XAppDescriptor


def ue_metric(ue_id="u1", serving="A", tick=0, throughput=8.0, neighbours=(("B", -90.0),)):
    return {
        "ue_id": ue_id,
        "tick": tick,
        "serving_cell": serving,
        "sinr_serving": 12.0,
        "rsrp_serving": -80.0,
        "prb_usage": 25.0,
        "throughput_dl": throughput,
        "neighbours": [list(n) for n in neighbours],
    }


def cell_metric(cell_id, tick=0, n=4, load=20.0, aggregate=40.0):
    return {"cell_id": cell_id, "tick": tick, "connected_ue_count": n, "load": load,
            "aggregate_throughput": aggregate}


def prediction(per_cell, serving="A", ue_id="u1"):
    return {"ue_id": ue_id, "serving_cell": serving, "per_cell": per_cell, "model_version": 1}


def two_cell_world():
    return World([Cell("A", (0.0, 0.0)), Cell("B", (500.0, 0.0))],
                 [Ue("u1", (100.0, 0.0), "A"), Ue("u2", (150.0, 20.0), "A"), Ue("u3", (420.0, 0.0), "B")],
                 rng=np.random.default_rng(4))


# --- regression ---

def test_qoe_train_matches_centred_normal_equations():
    rng = np.random.default_rng(42)
    X = rng.normal(0.0, 3.0, size=(60, N_FEATURES))
    y = X @ rng.normal(size=N_FEATURES) + 7.0 + rng.normal(0.0, 0.5, size=60)
    lam = 0.1
    model = qoe_train([(FeatureVector(tuple(row)), label) for row, label in zip(X, y)], lam)

    mean_x, mean_y = X.mean(axis=0), y.mean()
    Xc = X - mean_x
    weights = np.linalg.solve(Xc.T @ Xc + lam * np.eye(N_FEATURES), Xc.T @ (y - mean_y))
    bias = mean_y - mean_x @ weights

    assert np.allclose(model.weights, weights, atol=1e-9)
    assert model.bias == pytest.approx(bias, abs=1e-9)
    assert model.training_row_count == 60
    assert model.feature_ranges[0] == (X[:, 0].min(), X[:, 0].max())


def test_qoe_train_needs_two_rows():
    with pytest.raises(NoDataError):
        qoe_train([(FeatureVector((0.0,) * N_FEATURES), 1.0)])


def test_unregularised_fit_of_a_rank_deficient_design_is_singular():
    X = np.array([[1.0, 2.0], [2.0, 4.0], [3.0, 6.0]])
    with pytest.raises(SingularSystemError):
        ridge_fit(X, [1.0, 2.0, 3.0], lam=0.0)
    weights, _ = ridge_fit(X, [1.0, 2.0, 3.0], lam=0.1)
    assert np.all(np.isfinite(weights))


def test_least_squares_recovers_an_exact_plane():
    X = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [2.0, 3.0]])
    y = X @ np.array([2.0, -1.0]) + 0.5
    weights, bias = lstsq_fit(X, y)
    assert np.allclose(weights, [2.0, -1.0]) and bias == pytest.approx(0.5)


def test_feature_vectors_are_schema_checked():
    with pytest.raises(SchemaMismatchError):
        FeatureVector((1.0, 2.0))
    with pytest.raises(SchemaMismatchError):
        FeatureVector((math.nan,) * N_FEATURES)
    model = LinearModel(weights=(1.0,) * N_FEATURES, bias=-100.0, lam=0.1, training_row_count=2)
    assert model.predict(FeatureVector((1.0,) * N_FEATURES)) == 0.0
    assert model.raw((1.0,) * N_FEATURES) == pytest.approx(-92.0)
    assert LinearModel.from_dict(model.to_dict()) == model
    with pytest.raises(ValueError):
        LinearModel(weights=(), bias=0.0, lam=-1.0, training_row_count=0)


# --- featurization ---

def test_featurize_pads_missing_neighbours():
    vector = featurize(ue_metric(), {"A": cell_metric("A")})
    assert vector.values == (12.0, -80.0, 25.0, -90.0, config.RSRP_SENTINEL_DBM,
                             config.RSRP_SENTINEL_DBM, 10.0, 20.0)
    # unknown serving cell contributes zeros
    assert featurize(ue_metric(), {}).values[-2:] == (0.0, 0.0)


def test_candidate_vectors_estimate_the_neighbour():
    vectors = candidate_vectors(ue_metric(), {"A": cell_metric("A"), "B": cell_metric("B", n=1, aggregate=30.0)})
    assert set(vectors) == {"A", "B"}
    b = vectors["B"].values
    assert b[0] == pytest.approx(sinr_from_powers(-90.0, [-80.0]))
    assert b[1] == -90.0
    assert b[2] == pytest.approx(50.0)
    assert b[3] == -80.0
    assert b[6:] == (30.0, 20.0)


def test_qoe_featurize_uses_the_latest_record():
    history = [ue_metric(tick=1, throughput=3.0), ue_metric(tick=4), ue_metric(ue_id="u2", tick=9)]
    assert qoe_featurize("u1", history, {}) == featurize(history[1], {})
    with pytest.raises(NoDataError):
        qoe_featurize("u9", history, {})


# --- anomaly detection ---

def test_anomaly_score_is_a_z_score_of_the_latest_sample():
    report = ad_detect("u1", [1.0, 3.0, 1.0, 3.0, 10.0], tick=4)
    assert report.score == pytest.approx(8.0) and report.flagged
    assert not ad_detect("u1", [1.0, 3.0, 2.0]).flagged


def test_constant_prefix_scores_zero_or_infinity():
    assert ad_detect("u1", [5.0, 5.0, 5.0]).score == 0.0
    report = ad_detect("u1", [5.0, 5.0, 6.0])
    assert math.isinf(report.score) and report.flagged
    assert report.to_dict()["score"] == "inf"
    with pytest.raises(InsufficientWindowError):
        ad_detect("u1", [1.0, 2.0])


# --- traffic steering ---

def test_merge_preferences_forbid_wins():
    policies = [
        A1Policy("p1", "ALL", (("B", "PREFER"),)),
        A1Policy("p2", "u1", (("B", "FORBID"), ("A", "AVOID"))),
        A1Policy("p3", "u1", (("C", "PREFER"),), valid_from=10),
    ]
    assert merge_preferences(policies, "u1", 0) == {"B": "FORBID", "A": "AVOID"}
    assert merge_preferences(policies, "u2", 10) == {"B": "PREFER"}


def test_ts_decide_needs_the_hysteresis_margin():
    decision = ts_decide([], prediction({"A": 10.0, "B": 13.0}))
    assert (decision.target_cell, decision.reason) == ("B", "margin")
    assert decision.gain == pytest.approx(1.3)
    assert ts_decide([], prediction({"A": 10.0, "B": 11.0})) is None


def test_ts_decide_anomaly_and_avoid_lower_the_bar():
    assert ts_decide([], prediction({"A": 10.0, "B": 11.0}), anomalous=True).reason == "anomaly"
    avoid = [A1Policy("p", "u1", (("A", "AVOID"),))]
    assert ts_decide(avoid, prediction({"A": 10.0, "B": 11.0})).reason == "avoid"
    forbid = [A1Policy("p", "u1", (("A", "FORBID"),))]
    forced = ts_decide(forbid, prediction({"A": 10.0, "B": 5.0}))
    assert (forced.target_cell, forced.reason) == ("B", "avoid")


def test_ts_decide_respects_forbidden_and_full_cells():
    forbid_b = [A1Policy("p", "u1", (("B", "FORBID"),))]
    assert ts_decide(forbid_b, prediction({"A": 10.0, "B": 20.0})) is None
    kpis = {"A": cell_metric("A"), "B": cell_metric("B", load=100.0)}
    assert ts_decide([], prediction({"A": 10.0, "B": 20.0}), kpis=kpis) is None
    assert ts_decide([], prediction({"B": 20.0})) is None


def test_ts_decide_breaks_ties_towards_preferred_cells():
    prefer_c = [A1Policy("p", "ALL", (("C", "PREFER"),))]
    assert ts_decide([], prediction({"A": 1.0, "B": 5.0, "C": 5.0})).target_cell == "B"
    assert ts_decide(prefer_c, prediction({"A": 1.0, "B": 5.0, "C": 5.0})).target_cell == "C"


# --- rApp ---

def test_rapp_prefers_the_least_loaded_neighbour_for_sla_violators():
    ue_history = [ue_metric(tick=t, throughput=2.0, neighbours=(("B", -90.0), ("C", -95.0))) for t in range(3)]
    ue_history += [ue_metric(ue_id="u2", tick=t, throughput=30.0) for t in range(3)]
    cells = [cell_metric("A", load=90.0), cell_metric("B", load=60.0), cell_metric("C", load=30.0)]
    (policy,) = rapp_generate_policies(ue_history, cells, tick=99)
    assert policy.ue_scope == "u1"
    assert policy.preferences == (("C", "PREFER"), ("A", "AVOID"))
    assert (policy.valid_from, policy.valid_until) == (99, 99 + config.RAPP_PERIOD)
    assert policy.applies("u1", 150) and not policy.applies("u1", 199)


def test_rapp_skips_when_every_neighbour_is_busy():
    ue_history = [ue_metric(throughput=1.0)]
    assert rapp_generate_policies(ue_history, [cell_metric("B", load=95.0)], tick=0) == []


def test_a1_policy_validation():
    with pytest.raises(ValueError):
        A1Policy("p", "ALL", (("B", "PREFER"), ("B", "AVOID")))
    with pytest.raises(ValueError):
        A1Policy("p", "ALL", (("B", "LOVE"),))
    policy = A1Policy("p", "u1", (("B", "AVOID"),), valid_from=5, valid_until=10)
    assert A1Policy.from_dict(policy.to_dict()) == policy
    assert [policy.applies("u1", t) for t in (4, 5, 9, 10)] == [False, True, True, False]


# --- apps on a platform ---

def routed_platform():
    return RicPlatform(two_cell_world(), seed=2)


def test_kpimon_writes_reports_and_rotates_subscriptions():
    platform = routed_platform()
    kpimon = KpiMonitor(platform, ["B", "A"])
    platform.begin_tick(0)
    kpimon.renew(0)
    platform.begin_tick(1)
    kpimon.renew(1)
    assert kpimon.leases == {"A": 20, "B": 21}

    emission = platform.world.step()
    for cell in emission.cell_metrics:
        report = {
            "ue_metrics": [m.to_dict() for m in emission.ue_metrics if m.serving_cell == cell.cell_id],
            "cell_metrics": cell.to_dict(),
        }
        kpimon.kpimon_tick(report)
    assert platform.sdl.count(UE_METRIC) == 3
    assert platform.sdl.count(CELL_METRIC) == 2
    assert kpimon.get_stats()["records_written"] == 5


def feed_metrics(platform, kpimon, ticks):
    for _ in range(ticks):
        emission = platform.world.step()
        for cell in emission.cell_metrics:
            kpimon.kpimon_tick({
                "ue_metrics": [m.to_dict() for m in emission.ue_metrics if m.serving_cell == cell.cell_id],
                "cell_metrics": cell.to_dict(),
            })


def test_qoe_retrains_and_publishes_predictions():
    platform = routed_platform()
    kpimon = KpiMonitor(platform, ["A", "B"])
    qoe = QoePredictor(platform, retrain_period=2, train_window=2, training_ue_ids=["u1", "u2"])
    feed_metrics(platform, kpimon, 2)
    platform.begin_tick(0)
    qoe.tick(0)
    assert qoe.model is None and platform.sdl.count(TRAIN_SET) == 2
    ues = [r.value for r in platform.sdl.scan(UE_METRIC, tick_prefix(0))]
    cells = {r.value["cell_id"]: r.value for r in platform.sdl.scan(CELL_METRIC, tick_prefix(0))}
    staged = platform.sdl.read(TRAIN_SET, tick_key(0, "u2")).value
    assert staged["features"] == list(qoe_featurize("u2", ues, cells).values)
    platform.begin_tick(1)
    qoe.tick(1)

    assert qoe.version == 1 and len(qoe.history) == 1
    stored = platform.sdl.read(MODEL_STORE, "v000001").value
    assert stored["trained_tick"] == 1 and stored["rows"] == 4
    assert platform.sdl.count(QOE_PREDICTION) == 3
    published = platform.sdl.read(QOE_PREDICTION, tick_key(1, "u1")).value
    assert set(published["per_cell"]) == {"A", "B"} and published["model_version"] == 1


def test_qoe_without_retention_keeps_no_train_set():
    platform = routed_platform()
    kpimon = KpiMonitor(platform, ["A", "B"])
    qoe = QoePredictor(platform, retrain_period=2, train_window=2, retention=False)
    feed_metrics(platform, kpimon, 2)
    for tick in range(2):
        platform.begin_tick(tick)
        qoe.tick(tick)
    assert platform.sdl.count(TRAIN_SET) == 0
    assert qoe.model.training_row_count == 6


def test_steering_pipeline_moves_a_ue():
    platform = routed_platform()
    ts = TrafficSteering(platform)
    rc = RanControl(platform)
    platform.register_xapp(XAppDescriptor("qoe"))
    platform.rmr_update_routes(config.ADMIN_ID, {"QOE_PREDICTION": "ts", "TS_CONTROL": "rc"},
                               platform.admin_token)
    platform.begin_tick(0)
    platform.rmr_send(Message(MsgType.QOE_PREDICTION, "qoe", prediction({"A": 1.0, "B": 5.0}), 0))
    ts.tick(0)
    rc.tick(0)
    platform.resolve_controls()

    assert ts.decisions == [{"tick": 0, "ue_id": "u1", "target_cell": "B", "reason": "margin"}]
    assert ts.fresh[0] == {"u1"}
    assert rc.stats["submitted"] == 1
    assert platform.world.ues["u1"].serving_cell == "B"

    platform.begin_tick(1)
    ts.tick(1)
    assert ts.starved == 1


def test_static_policy_reaches_steering():
    platform = routed_platform()
    ts = TrafficSteering(platform)
    rapp = PolicyRApp(platform, static_policies=[A1Policy("keep", "u1", (("B", "FORBID"),))])
    platform.register_xapp(XAppDescriptor("qoe"))
    platform.rmr_update_routes(config.ADMIN_ID, {"QOE_PREDICTION": "ts", "A1_POLICY": "ts"},
                               platform.admin_token)
    platform.begin_tick(0)
    rapp.tick(0)
    platform.rmr_send(Message(MsgType.QOE_PREDICTION, "qoe", prediction({"A": 1.0, "B": 5.0}), 0))
    ts.tick(0)
    assert [p.policy_id for p in ts.policies] == ["keep"]
    assert ts.decisions == []
    assert rapp.published == 1


def test_steering_with_no_candidate_cell_counts_as_starved():
    platform = routed_platform()
    ts = TrafficSteering(platform)
    rapp = PolicyRApp(platform, static_policies=[A1Policy("cage", "u1", (("A", "FORBID"), ("B", "FORBID")))])
    platform.register_xapp(XAppDescriptor("qoe"))
    platform.rmr_update_routes(config.ADMIN_ID, {"QOE_PREDICTION": "ts", "A1_POLICY": "ts"},
                               platform.admin_token)
    platform.begin_tick(0)
    rapp.tick(0)
    platform.rmr_send(Message(MsgType.QOE_PREDICTION, "qoe", prediction({"A": 1.0, "B": 5.0}), 0))
    ts.tick(0)
    assert ts.decisions == []
    assert ts.starved == 1 and ts.stats["no_candidates"] == 1
    assert ts.received == {0: 1}


def test_steering_keeps_only_recent_fresh_sets():
    platform = routed_platform()
    ts = TrafficSteering(platform)
    platform.register_xapp(XAppDescriptor("qoe"))
    platform.rmr_update_routes(config.ADMIN_ID, {"QOE_PREDICTION": "ts"}, platform.admin_token)
    for tick in range(5):
        platform.begin_tick(tick)
        if tick != 2:
            platform.rmr_send(Message(MsgType.QOE_PREDICTION, "qoe", prediction({"A": 5.0, "B": 1.0}), tick))
        ts.tick(tick)
    assert sorted(ts.fresh) == [3, 4]
    assert ts.received == {0: 1, 1: 1, 2: 0, 3: 1, 4: 1}
    assert ts.starved == 1


def test_anomaly_detector_flags_a_throughput_spike():
    platform = routed_platform()
    platform.register_xapp(XAppDescriptor("w", namespaces=((UE_METRIC, "write"),)))
    for tick, value in enumerate([1.0, 3.0, 1.0, 3.0, 10.0]):
        platform.sdl_write("w", UE_METRIC, tick_key(tick, "u1"), {"ue_id": "u1", "throughput_dl": value})
    ad = AnomalyDetector(platform)
    platform.begin_tick(4)
    ad.tick(4)
    assert ad.stats["flagged"] == 1


def test_observer_scans_on_its_period():
    platform = routed_platform()
    platform.register_xapp(XAppDescriptor("w", namespaces=((CELL_METRIC, "write"),)))
    for tick in (3, 4, 8):
        platform.sdl_write("w", CELL_METRIC, tick_key(tick, "A"), cell_metric("A", tick=tick))
    observer = Observer(platform, "dash", [CELL_METRIC], period=5, offset=3)
    for tick in range(10):
        observer.tick(tick)
    assert observer.rows_seen == 2
