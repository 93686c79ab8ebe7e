import json

import pandas as pd
import pytest

import app
import config
from harness.metrics import ReportError, compare, flatten_metrics, to_json, validate_report, write_report
from harness.scenario import ScenarioError, parse_scenario
from harness.scoring import altered_fraction, detection_quality, reference_plans
from harness.simulation import run_simulation
from harness.sweep import expand_grid, parse_seeds, sweep, sweep_table, write_sweep
from main import EXIT_INVALID, EXIT_IO, EXIT_OK, main

TINY = {
    "name": "tiny",
    "seed": 5,
    "ticks": 60,
    "cells": [{"cell_id": "A", "position": [0, 0]}, {"cell_id": "B", "position": [500, 0]}],
    "ues": [{"prefix": "u", "count": 6, "area": [50, -80, 450, 80], "speed": 2.0}],
    "apps": {"retrain_period": 20, "train_window": 20, "rapp_period": 30},
}


@pytest.fixture(scope="module")
def tiny_run():
    return app.run(parse_scenario(TINY))


def tiny_with(**overrides):
    return parse_scenario({**TINY, **overrides})


# --- determinism and report shape ---

def test_same_seed_gives_identical_report_bytes(tiny_run):
    report, _ = tiny_run
    again, _ = app.run(parse_scenario(TINY))
    assert to_json(report) == to_json(again)


def test_other_seed_changes_the_run(tiny_run):
    report, _ = tiny_run
    other, _ = app.run(parse_scenario(TINY), seed=6)
    assert other["seed"] == 6 and other["config_hash"] == report["config_hash"]
    assert to_json(other) != to_json(report)


def test_report_validates_and_keeps_timing_apart(tiny_run):
    report, timing = tiny_run
    validated = validate_report(report)
    assert validated.ticks == 60 and validated.family == report["config_hash"].split(":")[0]
    assert "mean_tick_ms" not in to_json(report)
    assert set(timing) == {"scenario", "seed", "mean_tick_ms", "mean_defence_ms", "defence_share", "tick_budget_ms"}
    assert timing["tick_budget_ms"] == float(config.TICK_MS)


def test_clean_run_has_no_attacks_and_no_alerts(tiny_run):
    report, _ = tiny_run
    assert report["attacks"] == []
    defences = report["defences"]
    assert defences["alert_count"] == 0 and defences["quarantines"] == {}
    assert (defences["precision"], defences["recall"]) == (1.0, 1.0)
    assert report["pipeline"]["retrains"] == 3 and report["model"]["version"] == 3
    latency = report["pipeline"]["median_control_latency_ticks"]
    if latency is not None:
        assert report["pipeline"]["median_control_latency_ms"] == latency * config.TICK_MS


def test_simulation_truth_covers_every_tick():
    sim = run_simulation(tiny_with(ticks=10))
    assert [t.tick for t in sim.truth] == list(range(10))
    assert set(sim.truth[-1].throughput) == set(sim.world.ues)
    assert len(sim.tick_seconds) == 10


def test_disabling_ts_removes_steering():
    sim = run_simulation(tiny_with(ticks=30, apps={**TINY["apps"], "ts_enabled": False}))
    assert "ts" not in sim.apps and "rc" not in sim.apps
    assert sim.platform.handovers == []


# --- scoring helpers ---

def test_detection_quality():
    assert detection_quality(["mal", "qoe"], ["mal", "mal2"]) == {"precision": 0.5, "recall": 0.5}
    assert detection_quality([], []) == {"precision": 1.0, "recall": 1.0}
    assert detection_quality([], ["mal"]) == {"precision": 1.0, "recall": 0.0}


def test_altered_fraction():
    clean = {(1, "u1"): "B", (2, "u1"): "A"}
    attacked = {(1, "u1"): "B", (2, "u1"): "B", (3, "u2"): "A"}
    assert altered_fraction(attacked, clean) == pytest.approx(2 / 3)
    assert altered_fraction({}, {}) == 0.0


def test_reference_plans():
    assert reference_plans(parse_scenario(TINY)) == {}
    tamper = tiny_with(attacks=[{"kind": "TAMPER", "attacker_id": "mal", "start": 10}])
    plans = reference_plans(tamper)
    assert list(plans) == ["clean"] and plans["clean"].attacks == []
    poison = tiny_with(attacks=[{"kind": "MIA_POISON", "attacker_id": "mal", "target": "u-01", "start": 10,
                                 "stop": 30, "params": {"control_ue": "u-04"}}])
    control = reference_plans(poison)["control:mal"].attacks[0]
    assert control.target == "u-04" and control.params["probe_ue"] == "u-01"


def perturbation_scenario(intensity):
    return tiny_with(
        apps={**TINY["apps"], "training_ue_ids": ["u-00", "u-01", "u-02"]},
        attacks=[{"kind": "MIA_POISON", "attacker_id": "mal", "target": "u-01", "intensity": intensity,
                  "start": 10, "stop": 30, "params": {"control_ue": "u-04"}}],
    )


def test_zero_perturbation_gives_zero_shift_and_non_member_verdict():
    report, _ = app.run(perturbation_scenario(0.0))
    metrics = report["attacks"][0]["success_metric"]
    assert metrics["shift"] == 0.0 and metrics["control_shift"] == 0.0
    assert metrics["verdict_member"] == 0.0


def test_perturbation_shift_isolates_the_inflated_rows():
    report, _ = app.run(perturbation_scenario(40.0))
    metrics = report["attacks"][0]["success_metric"]
    assert metrics["control_shift"] == 0.0
    assert metrics["shift"] != 0.0
    assert metrics["verdict_member"] == 1.0 and metrics["correct"] == 1.0


def test_blackhole_starves_every_clean_prediction():
    scenario = tiny_with(attacks=[{"kind": "ROUTE_HIJACK", "attacker_id": "mal", "start": 30, "stop": 60,
                                   "params": {"msg_type": "QOE_PREDICTION", "mode": "blackhole"}}])
    report, _ = app.run(scenario)
    hijack = report["attacks"][0]
    clean_predictions = hijack["ground_truth"]["clean_predictions"]
    assert clean_predictions > 0
    assert hijack["success_metric"]["starved_predictions"] == clean_predictions


# --- compare ---

def report_stub(config_hash="aaaaaaaaaaaa:0000000000000000", **network):
    return {
        "scenario": "stub",
        "config_hash": config_hash,
        "network": {"mean_ue_throughput_mbps": 10.0, "handover_count": 4, **network},
        "pipeline": {"median_control_latency_ms": None},
        "defences": {"precision": 1.0, "alerts": []},
        "attacks": [{"attacker_id": "mal", "status": "blocked", "detected": True,
                     "success_metric": {"denial_rate": 0.5, "quarantine_latency_ticks": None}}],
    }


def test_flatten_metrics_keeps_numbers_only():
    flat = flatten_metrics(report_stub())
    assert flat == {
        "network.mean_ue_throughput_mbps": 10.0,
        "network.handover_count": 4.0,
        "defences.precision": 1.0,
        "attacks.mal.denial_rate": 0.5,
        "attacks.mal.detected": 1.0,
        "attacks.mal.blocked": 1.0,
    }


def test_compare_against_itself_has_zero_deltas():
    rows = compare(report_stub(), report_stub())
    assert all(row["v0_delta"] == 0.0 for row in rows)
    assert {row["metric"]: row["v0_ratio"] for row in rows}["network.handover_count"] == 1.0


def test_compare_counts_missing_metrics_as_zero():
    variant = report_stub(mean_ue_throughput_mbps=5.0, forbid_handovers=2)
    rows = {row["metric"]: row for row in compare(report_stub(), variant)}
    assert rows["network.mean_ue_throughput_mbps"]["v0_delta"] == -5.0
    assert rows["network.mean_ue_throughput_mbps"]["v0_ratio"] == 0.5
    added = rows["network.forbid_handovers"]
    assert (added["baseline"], added["v0_delta"], added["v0_ratio"]) == (None, 2.0, None)


def test_compare_refuses_other_families():
    with pytest.raises(ReportError):
        compare(report_stub(), report_stub("bbbbbbbbbbbb:0000000000000000"))
    with pytest.raises(ReportError):
        compare({"scenario": "x"})


# --- sweeps ---

def test_expand_grid_in_key_order():
    assert expand_grid({}) == [{}]
    assert expand_grid({"a": [1, 2], "b": ["x", "y"]}) == [
        {"a": 1, "b": "x"}, {"a": 1, "b": "y"}, {"a": 2, "b": "x"}, {"a": 2, "b": "y"}]
    with pytest.raises(ScenarioError):
        expand_grid({"a": []})
    with pytest.raises(ScenarioError):
        expand_grid({"a": 3})


def test_parse_seeds():
    assert parse_seeds("1..4") == [1, 2, 3, 4]
    assert parse_seeds("7, 3") == [7, 3]
    assert parse_seeds("9") == [9]
    for bad in ("4..1", "a..b", "1,,2"):
        with pytest.raises(ScenarioError) as error:
            parse_seeds(bad)
        assert error.value.path == "seeds"


def test_sweep_runs_grid_major_then_seed(tmp_path):
    runs = sweep(tiny_with(ticks=20), {"platform.channel": ["plaintext", "secure"]}, [1, 2, 3])
    assert [(r.index, r.seed) for r in runs] == [(0, 1), (0, 2), (0, 3), (1, 1), (1, 2), (1, 3)]
    assert runs[0].report["config_hash"] != runs[3].report["config_hash"]
    table = sweep_table(runs)
    assert list(table.columns[:4]) == ["point", "seed", "scenario", "config_hash"]
    assert table["param:platform.channel"].tolist()[-1] == '"secure"'

    csv_path = write_sweep(runs, tmp_path)
    assert len(pd.read_csv(csv_path)) == 6
    assert (tmp_path / "runs" / "p001-s3.json").exists()
    assert (tmp_path / "runs" / "p001-s3.timing.json").exists()


def test_sweep_rejects_unknown_grid_paths():
    with pytest.raises(ScenarioError):
        sweep(tiny_with(ticks=5), {"apps.nope": [1]}, [1])


# --- command line ---

@pytest.fixture
def scenario_file(tmp_path):
    path = tmp_path / "tiny.json"
    path.write_text(json.dumps({**TINY, "ticks": 25}))
    return path


def test_cli_validate(scenario_file, tmp_path):
    assert main(["validate", "--scenario", str(scenario_file)]) == EXIT_OK
    (tmp_path / "bad.json").write_text(json.dumps({**TINY, "ticks": 0}))
    assert main(["validate", "--scenario", str(tmp_path / "bad.json")]) == EXIT_INVALID
    assert main(["validate", "--scenario", str(tmp_path / "missing.json")]) == EXIT_IO


def test_cli_run_and_compare(scenario_file, tmp_path):
    out = tmp_path / "out"
    assert main(["run", "--scenario", str(scenario_file), "--out", str(out)]) == EXIT_OK
    report_path = out / "report.json"
    assert validate_report(json.loads(report_path.read_text())).ticks == 25
    assert (out / "report.timing.json").exists()

    table = tmp_path / "delta.csv"
    assert main(["compare", str(report_path), str(report_path), "--out", str(table)]) == EXIT_OK
    assert (pd.read_csv(table)["v0_delta"] == 0).all()

    other = tmp_path / "other"
    write_report({**json.loads(report_path.read_text()), "config_hash": "bbbbbbbbbbbb:0000000000000000"},
                 {}, other)
    assert main(["compare", str(report_path), str(other / "report.json")]) == EXIT_INVALID
