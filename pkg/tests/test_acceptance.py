"""End-to-end checks over the bundled scenarios (pytest -m slow)."""

import json
from functools import lru_cache
from pathlib import Path

import pytest

import app
import config
from harness.scenario import load_scenario

pytestmark = pytest.mark.slow


SEEDS = range(10)


@lru_cache(maxsize=None)
def run_with_timing(name, seed=None):
    return app.run(load_scenario(config.SCENARIOS_DIR / f"{name}.json"), seed=seed)


def run(name, seed=None):
    return run_with_timing(name, seed)[0]


def outcome(report, attacker_id):
    (found,) = [a for a in report["attacks"] if a["attacker_id"] == attacker_id]
    return found


def test_baseline_respects_the_static_policy():
    report = run("baseline-2cell")
    assert report["attacks"] == []
    assert report["defences"]["alert_count"] == 0
    assert report["network"]["forbid_handovers"] == 0
    assert report["pipeline"]["retrains"] == 4


@pytest.mark.parametrize("seed", SEEDS)
def test_steering_never_uses_a_forbidden_cell(seed):
    assert run("baseline-2cell", seed)["network"]["forbid_handovers"] == 0


def test_steering_beats_no_steering_in_nine_of_ten_seeds():
    wins = sum(
        run("baseline-2cell", seed)["network"]["mean_ue_throughput_mbps"]
        > run("baseline-2cell-no-ts", seed)["network"]["mean_ue_throughput_mbps"]
        for seed in SEEDS
    )
    assert wins >= 9


def test_defence_overhead_fits_the_tick_budget():
    _, timing = run_with_timing("baseline-2cell")
    assert timing["defence_share"] < 0.1
    assert timing["tick_budget_ms"] == float(config.TICK_MS)


def test_flood_denies_every_legitimate_subscription():
    attacked = outcome(run("rmr-flood"), "mal-flood")
    assert attacked["status"] == "success"
    assert attacked["success_metric"]["denial_rate"] == 1.0

    defended = outcome(run("rmr-flood-defended"), "mal-flood")
    assert defended["detected"] and defended["quarantined_at"] is not None
    assert defended["success_metric"]["post_quarantine_denial_rate"] == 0.0


def test_route_hijack_redirects_until_zero_trust():
    report = run("route-hijack")
    hijack = outcome(report, "mal-hijack")
    assert hijack["status"] == "success"
    assert hijack["success_metric"]["redirect_fraction"] == 1.0
    assert report["pipeline"]["ts_starved_ticks"] >= 150
    starved = hijack["success_metric"]["starved_predictions"]
    assert starved == hijack["ground_truth"]["clean_predictions"] == 150 * 20

    blocked = outcome(run("route-hijack-zero-trust"), "mal-hijack")
    assert blocked["status"] == "blocked" and blocked["blocked_reason"] == "unauthenticated"
    assert blocked["success_metric"]["forged_alerts"] == 1.0


def test_e2mgr_exploit_takes_the_cell_dark():
    exploit = outcome(run("e2mgr-exploit"), "mal-e2mgr")
    metrics = exploit["success_metric"]
    assert exploit["status"] == "success"
    assert metrics["outage_ticks"] == 100.0
    assert metrics["missing_data_ticks"] == metrics["outage_ticks"]
    assert metrics["ue_metric_writes"] == 0.0

    secure = outcome(run("e2mgr-exploit-secure"), "mal-e2mgr")
    assert secure["status"] == "blocked" and secure["success_metric"]["admin_actions_applied"] == 0.0


def test_residual_training_rows_leak_membership():
    leak = outcome(run("mia-leak"), "mal-mia")
    assert leak["status"] == "success"
    assert leak["success_metric"]["auc"] == 1.0
    assert len(leak["ground_truth"]["members"]) == 10

    no_retention = outcome(run("mia-leak-no-retention"), "mal-mia")
    assert no_retention["success_metric"]["auc"] == 0.5
    assert no_retention["success_metric"]["rows_scanned"] == 0.0

    assert outcome(run("mia-leak-least-privilege"), "mal-mia")["status"] == "blocked"


def test_perturbing_a_member_moves_the_model_more_than_a_non_member():
    poison = outcome(run("mia-poison"), "mal-mia-poison")
    assert poison["status"] == "success"
    metrics = poison["success_metric"]
    assert metrics["control_shift"] == 0.0
    assert abs(metrics["shift"]) > abs(metrics["control_shift"])
    assert metrics["correct"] == 1.0


def test_scraped_predictions_extract_the_model():
    scrape = outcome(run("mea-4cell"), "mal-scrape")
    assert scrape["status"] == "success"
    assert scrape["success_metric"]["fidelity"] >= 0.9
    assert scrape["success_metric"]["exposed_records"] == 0.0

    assert outcome(run("mea-4cell-least-privilege"), "mal-scrape")["status"] == "blocked"


def test_label_shift_degrades_the_model():
    poison = outcome(run("data-poison"), "mal-poison")
    assert poison["status"] == "success"
    assert poison["success_metric"]["rmse_delta"] > 1.0
    assert outcome(run("data-poison-least-privilege"), "mal-poison")["status"] == "blocked"


def test_tampering_alters_decisions_only_on_plaintext():
    assert outcome(run("tamper"), "mal-tamper")["success_metric"]["altered_fraction"] > 0.0
    secure = outcome(run("tamper-secure"), "mal-tamper")
    assert secure["status"] == "blocked" and secure["blocked_reason"] == "secure-channel"


def test_conflict_exhaustion_inflates_control_latency():
    attacked = outcome(run("conflict-exhaust"), "mal-conflict")
    assert attacked["success_metric"]["latency_factor"] >= 3.0

    defended = outcome(run("conflict-exhaust-defended"), "mal-conflict")
    assert defended["detected"] and defended["quarantined_at"] is not None
    recovery = defended["success_metric"]["post_quarantine_factor"]
    assert recovery is not None and recovery <= 1.5


def test_detection_suite_catches_every_attacker():
    report = run("detection-suite")
    defences = report["defences"]
    assert defences["recall"] == 1.0
    assert set(defences["attackers"]) <= set(defences["quarantines"])
    assert all(a["detected"] for a in report["attacks"])


def test_detection_quality_holds_across_seeds():
    reports = [run("detection-suite", seed)["defences"] for seed in SEEDS]
    precision = sum(r["precision"] for r in reports) / len(reports)
    recall = sum(r["recall"] for r in reports) / len(reports)
    assert precision >= 0.9 and recall >= 0.8


CASES = json.loads((Path(__file__).parent / "test_cases.json").read_text())


@pytest.mark.parametrize("case", CASES, ids=lambda c: c["id"])
def test_scenario_case(case):
    found = outcome(run(case["scenario"]), case["attacker_id"])
    assert found["status"] == case["expected_status"], case["name"]
    if "expected_detected" in case:
        assert found["detected"] == case["expected_detected"]
