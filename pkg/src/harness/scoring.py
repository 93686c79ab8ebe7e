"""
Turns a finished run (plus its paired reference runs) into report sections.

Only this module sees ground truth: attacker identities, victim weights,
training membership and the clean reference runs. Nothing computed here flows
back into the apps or the defences.
"""

import logging
from statistics import median
from typing import Dict, Iterable, List, Mapping, Optional

import numpy as np
from sklearn.metrics import roc_auc_score

import config
from agents.base import CELL_METRIC, MODEL_STORE, TRAIN_SET, UE_METRIC, tick_key, tick_prefix
from agents.errors import NoDataError, SingularSystemError
from agents.model import FEATURES, LinearModel, featurize, qoe_train
from agents.rapp import A1Policy
from agents.ts import merge_preferences
from attacks.base import Attacker
from attacks.ml import fidelity
from attacks.types import AttackKind, AttackOutcome
from defences.behaviour import risk_score_manifest
from harness.scenario import Scenario, parse_scenario
from harness.simulation import SimulationResult
from ric.types import PLATFORM_IDS

logger = logging.getLogger(__name__)

DETECTION_RULES = frozenset({"rate-anomaly", "undeclared-namespace", "non-admin-route-update", "forged-route-update"})
LEGIT_ISSUER = "rc"
RECOVERY_TICKS = 20


# ----------------------------------------------------------------------
# Reference runs
# ----------------------------------------------------------------------

def reference_plans(scenario: Scenario) -> Dict[str, Scenario]:
    """Paired runs the scoring of `scenario` needs, keyed by purpose."""
    plans: Dict[str, Scenario] = {}
    kinds = {a.kind for a in scenario.attacks}
    if kinds & {AttackKind.TAMPER, AttackKind.CONFLICT_EXHAUST, AttackKind.ROUTE_HIJACK}:
        plans["clean"] = parse_scenario({**scenario.to_dict(), "attacks": []})
    for index, attack in enumerate(scenario.attacks):
        if attack.kind != AttackKind.MIA_POISON:
            continue
        control_ue = attack.params.get("control_ue")
        if control_ue is None:
            continue
        data = scenario.to_dict()
        entry = data["attacks"][index]
        entry["params"] = {**entry["params"], "probe_ue": entry["params"].get("probe_ue", attack.target)}
        entry["target"] = control_ue
        entry["attacker_id"] = attack.resolved_id(index)
        plans[f"control:{attack.resolved_id(index)}"] = parse_scenario(data)
    return plans


# ----------------------------------------------------------------------
# Network, pipeline, defences
# ----------------------------------------------------------------------

def network_kpis(sim: SimulationResult) -> Dict:
    samples = np.array([v for truth in sim.truth for _, v in sorted(truth.throughput.items())], dtype=float)
    sla = sim.scenario.apps.sla_mbps
    static = [A1Policy.from_dict(p.model_dump()) for p in sim.scenario.apps.static_policies]
    forbid = sum(
        1 for h in sim.platform.handovers
        if h.applied and merge_preferences(static, h.ue_id, h.tick).get(h.target_cell) == "FORBID"
    )
    empty = samples.size == 0
    return {
        "mean_ue_throughput_mbps": 0.0 if empty else float(samples.mean()),
        "p5_ue_throughput_mbps": 0.0 if empty else float(np.percentile(samples, 5)),
        "p50_ue_throughput_mbps": 0.0 if empty else float(np.percentile(samples, 50)),
        "p95_ue_throughput_mbps": 0.0 if empty else float(np.percentile(samples, 95)),
        "handover_count": sum(h.applied for h in sim.platform.handovers),
        "sla_violation_ticks": int((samples < sla).sum()),
        "forbid_handovers": forbid,
    }


def legit_latencies(sim: SimulationResult, start: int = 0, stop: Optional[int] = None) -> List[int]:
    stop = sim.scenario.ticks if stop is None else stop
    return [
        o.latency_ticks for o in sim.platform.control_log
        if o.issuer == LEGIT_ISSUER and o.verdict != "purged" and start <= o.submit_tick < stop
    ]


def pipeline_kpis(sim: SimulationResult) -> Dict:
    ts = sim.apps.get("ts")
    qoe = sim.apps["qoe"]
    latencies = legit_latencies(sim)
    latency = float(median(latencies)) if latencies else None
    legit = [o for o in sim.platform.control_log if o.issuer == LEGIT_ISSUER]
    return {
        "ts_decisions": len(ts.decisions) if ts else 0,
        "ts_starved_ticks": ts.starved if ts else 0,
        "predictions": qoe.stats["predictions"],
        "retrains": qoe.stats["retrains"],
        "model_version": qoe.version,
        "control_requests": len(legit),
        "control_accepted": sum(o.verdict == "accepted" for o in legit),
        "control_rejected": sum(o.verdict == "rejected-conflict" for o in legit),
        "median_control_latency_ticks": latency,
        "median_control_latency_ms": None if latency is None else latency * config.TICK_MS,
    }


def flagged_subjects(sim: SimulationResult) -> List[str]:
    return sorted({a.subject for a in sim.platform.alerts if a.rule in DETECTION_RULES})


def detection_quality(flagged: Iterable[str], attackers: Iterable[str]) -> Dict[str, float]:
    """Per-xApp precision and recall; 1.0 when nothing is flagged / nothing attacks."""
    flagged, attackers = set(flagged), set(attackers)
    hits = len(flagged & attackers)
    return {
        "precision": hits / len(flagged) if flagged else 1.0,
        "recall": hits / len(attackers) if attackers else 1.0,
    }


def defence_outcomes(sim: SimulationResult) -> Dict:
    flagged = flagged_subjects(sim)
    platform = sim.platform
    return {
        "alerts": [a.to_dict() for a in platform.alerts],
        "alert_count": len(platform.alerts),
        "quarantines": dict(sorted(platform.quarantined.items())),
        "flagged": flagged,
        "attackers": sorted(sim.attacker_ids),
        **detection_quality(flagged, sim.attacker_ids),
        "risk": {x: risk_score_manifest(d) for x, d in sorted(platform.descriptors.items())
                 if x not in PLATFORM_IDS},
    }


# ----------------------------------------------------------------------
# Attacks
# ----------------------------------------------------------------------

def _audit(sim: SimulationResult, op: str, start: int = 0, stop: Optional[int] = None):
    stop = sim.scenario.ticks if stop is None else stop
    return [e for e in sim.platform.audit if e.op == op and start <= e.tick < stop]


def _models(sim: SimulationResult) -> List[Dict]:
    return [r.value for r in sim.platform.sdl.scan(MODEL_STORE)]


def _victim(sim: SimulationResult, version: int) -> Optional[LinearModel]:
    for value in _models(sim):
        if int(value["version"]) == version:
            return LinearModel.from_dict(value)
    return None


def _rmse(model: LinearModel, rows) -> float:
    errors = [model.predict(fv) - label for fv, label in rows]
    return float(np.sqrt(np.mean(np.square(errors)))) if errors else 0.0


def _training_members(sim: SimulationResult) -> List[str]:
    ids = sim.scenario.apps.training_ue_ids
    return sorted(ids) if ids is not None else sorted(sim.world.ues)


def score_mia_leak(sim, attacker, refs) -> Dict:
    members = set(_training_members(sim))
    scores = attacker.observations.get("scores", {})
    ground_truth = {"members": sorted(members & set(scores)), "non_members": sorted(set(scores) - members)}
    if not scores:
        return {"status": "inconclusive", "ground_truth": ground_truth, "metrics": {"auc": None}}
    labels = [int(ue in members) for ue in sorted(scores)]
    values = [scores[ue] for ue in sorted(scores)]
    auc = float(roc_auc_score(labels, values)) if 0 < sum(labels) < len(labels) else None
    member_scores = [scores[u] for u in ground_truth["members"]]
    other_scores = [scores[u] for u in ground_truth["non_members"]]
    return {
        "status": "success",
        "ground_truth": ground_truth,
        "metrics": {
            "auc": auc,
            "member_score_mean": float(np.mean(member_scores)) if member_scores else None,
            "non_member_score_mean": float(np.mean(other_scores)) if other_scores else None,
            "rows_scanned": float(attacker.observations["rows_scanned"]),
        },
    }


def score_mia_poison(sim, attacker, refs) -> Dict:
    target = attacker.config.target
    ground_truth = {"target": target, "target_is_member": target in _training_members(sim)}
    shift = attacker.observations.get("shift")
    control = refs.get(f"control:{attacker.xapp_id}")
    control_shift = None
    if control is not None:
        twin = next((a for a in control.attackers if a.xapp_id == attacker.xapp_id), None)
        control_shift = twin.observations.get("shift") if twin else None
    if shift is None or control_shift is None:
        return {"status": "inconclusive", "ground_truth": ground_truth,
                "metrics": {"shift": shift, "control_shift": control_shift}}
    member = abs(shift) > abs(control_shift)
    return {
        "status": "success",
        "ground_truth": ground_truth,
        "metrics": {
            "shift": shift,
            "control_shift": control_shift,
            "verdict_member": float(member),
            "correct": float(member == ground_truth["target_is_member"]),
        },
    }


def _exposed_records(sim: SimulationResult, xapp_id: str, namespaces) -> int:
    return sum(
        int(e.detail.get("count", 0))
        for e in sim.platform.audit
        if e.caller == xapp_id and e.verdict == "allow" and e.detail.get("namespace") in namespaces
        and e.op in ("sdl_read", "sdl_scan")
    )


def score_mea_scrape(sim, attacker, refs) -> Dict:
    obs = attacker.observations
    exposed = _exposed_records(sim, attacker.xapp_id, (TRAIN_SET, MODEL_STORE))
    victim = _victim(sim, int(obs.get("version", 0))) if obs else None
    ground_truth = {"victim": victim.to_dict() if victim else None}
    if attacker.config.intensity == 0:
        return {"status": "inactive", "ground_truth": ground_truth,
                "metrics": {"fidelity": None, "exposed_records": float(exposed)}}
    if "surrogate" not in obs or victim is None:
        return {"status": "inconclusive", "ground_truth": ground_truth,
                "metrics": {"fidelity": None, "pairs": float(obs.get("pairs", 0)), "exposed_records": float(exposed)}}
    surrogate = LinearModel.from_dict(obs["surrogate"])
    theirs = np.array([*victim.weights, victim.bias])
    ours = np.array([*surrogate.weights, surrogate.bias])
    return {
        "status": "success",
        "ground_truth": ground_truth,
        "metrics": {
            "fidelity": fidelity(surrogate, victim),
            "weight_error": float(np.max(np.abs(theirs - ours))),
            "pairs": float(obs["pairs"]),
            "exposed_records": float(exposed),
        },
    }


def score_mea_poison(sim, attacker, refs) -> Dict:
    obs = attacker.observations
    weights = obs.get("weights", {})
    victim = _victim(sim, int(obs["model_version"])) if "model_version" in obs else None
    ground_truth = {"victim": victim.to_dict() if victim else None}
    if not weights or victim is None:
        status = "inactive" if attacker.config.intensity == 0 else "inconclusive"
        return {"status": status, "ground_truth": ground_truth,
                "metrics": {"recovered_axes": float(len(weights)), "weight_error": None}}
    true_weights = dict(zip(FEATURES, victim.weights))
    error = max(abs(w - true_weights[f]) for f, w in weights.items())
    return {
        "status": "success",
        "ground_truth": ground_truth,
        "metrics": {"recovered_axes": float(len(weights)), "weight_error": float(error)},
    }


def clean_training_rows(sim: SimulationResult, trained_tick: int):
    """Training rows of the window ending at `trained_tick`, rebuilt from the metric namespaces."""
    apps = sim.scenario.apps
    members = set(_training_members(sim))
    attackers = set(sim.attacker_ids)
    rows = []
    for t in range(max(0, trained_tick - apps.train_window + 1), trained_tick + 1):
        cells = {r.value["cell_id"]: r.value for r in sim.platform.sdl.scan(CELL_METRIC, tick_prefix(t))
                 if r.writer not in attackers}
        for record in sim.platform.sdl.scan(UE_METRIC, tick_prefix(t)):
            ue = record.value
            if ue["ue_id"] in members and record.writer not in attackers:
                rows.append((featurize(ue, cells), float(ue["throughput_dl"])))
    return rows


def score_data_poison(sim, attacker, refs) -> Dict:
    start = attacker.config.start
    trained = [v for v in _models(sim) if int(v["trained_tick"]) >= start]
    if not trained:
        return {"status": "inconclusive", "ground_truth": {}, "metrics": {"rmse_attacked": None}}
    victim_data = trained[-1]
    victim = LinearModel.from_dict(victim_data)
    rows = clean_training_rows(sim, int(victim_data["trained_tick"]))
    try:
        oracle = qoe_train(rows, sim.scenario.apps.lam, version=victim.model_version)
    except (NoDataError, SingularSystemError) as e:
        logger.warning("no oracle refit for %s: %s", attacker.xapp_id, e)
        return {"status": "inconclusive", "ground_truth": {}, "metrics": {"rmse_attacked": None}}
    attacked, baseline = _rmse(victim, rows), _rmse(oracle, rows)
    status = "inactive" if attacker.observations.get("poisoned_rows", 0) == 0 else "success"
    return {
        "status": status,
        "ground_truth": {"victim": victim.to_dict(), "oracle": oracle.to_dict(),
                         "trained_tick": int(victim_data["trained_tick"])},
        "metrics": {
            "rmse_attacked": attacked,
            "rmse_baseline": baseline,
            "rmse_delta": attacked - baseline,
            "poisoned_rows": float(attacker.observations.get("poisoned_rows", 0)),
        },
    }


def _decisions(sim: Optional[SimulationResult], start: int, stop: int) -> Dict:
    if sim is None or "ts" not in sim.apps:
        return {}
    return {(d["tick"], d["ue_id"]): d["target_cell"] for d in sim.apps["ts"].decisions
            if start <= d["tick"] < stop}


def altered_fraction(attacked: Mapping, clean: Mapping) -> float:
    keys = set(attacked) | set(clean)
    if not keys:
        return 0.0
    return sum(attacked.get(k) != clean.get(k) for k in keys) / len(keys)


def score_tamper(sim, attacker, refs) -> Dict:
    start = attacker.observations.get("installed_at", attacker.config.start)
    stop = attacker.config.stop
    ours, theirs = _decisions(sim, start, stop), _decisions(refs.get("clean"), start, stop)
    return {
        "status": "success",
        "ground_truth": {"clean_decisions": len(theirs), "attacked_decisions": len(ours)},
        "metrics": {
            "altered_fraction": altered_fraction(ours, theirs) if attacker.blocked_reason is None else 0.0,
            "mutated_messages": float(attacker.stats["mutated"]),
        },
    }


def _denial_rate(entries) -> Optional[float]:
    if not entries:
        return None
    return sum(e.verdict == "rejected" for e in entries) / len(entries)


def score_flood(sim, attacker, refs) -> Dict:
    cfg = attacker.config
    attackers = set(sim.attacker_ids) | PLATFORM_IDS
    legit = [e for e in _audit(sim, "e2_subscribe", cfg.start, cfg.stop) if e.caller not in attackers]
    quarantined = sim.platform.quarantined.get(attacker.xapp_id)
    after = [e for e in legit if quarantined is not None and e.tick > quarantined]
    return {
        "status": "success" if cfg.intensity > 0 else "inactive",
        "ground_truth": {"legit_attempts": len(legit)},
        "metrics": {
            "denial_rate": _denial_rate(legit) or 0.0,
            "post_quarantine_denial_rate": _denial_rate(after) if quarantined is not None else None,
            "quarantine_latency_ticks": None if quarantined is None else float(max(0, quarantined - cfg.start)),
        },
    }


def score_route_hijack(sim, attacker, refs) -> Dict:
    cfg = attacker.config
    accepted = attacker.observations.get("accepted_tick")
    msg_type = attacker.msg_type.value
    forged = sum(1 for a in sim.platform.alerts
                 if a.subject == attacker.xapp_id and a.rule == "forged-route-update")
    redirect = 0.0
    if accepted is not None:
        sends = [e for e in _audit(sim, "rmr_send", accepted, cfg.stop)
                 if e.resource == msg_type and e.caller != attacker.xapp_id and e.caller not in PLATFORM_IDS]
        if sends:
            redirect = sum(e.detail.get("to") == attacker.xapp_id for e in sends) / len(sends)
    clean = refs.get("clean")
    ts = sim.apps.get("ts")
    clean_predictions = starved = None
    if clean is not None and accepted is not None and ts is not None and "ts" in clean.apps:
        window = range(accepted, cfg.stop)
        expected = {t: clean.apps["ts"].received.get(t, 0) for t in window}
        clean_predictions = sum(expected.values())
        starved = sum(max(0, expected[t] - ts.received.get(t, 0)) for t in window)
    return {
        "status": "success" if accepted is not None else "blocked",
        "ground_truth": {"accepted_tick": accepted, "clean_predictions": clean_predictions},
        "metrics": {
            "redirect_fraction": redirect,
            "captured": float(attacker.observations.get("captured", 0)),
            "starved_predictions": None if starved is None else float(starved),
            "forged_alerts": float(forged),
        },
    }


def score_e2mgr(sim, attacker, refs) -> Dict:
    obs = attacker.observations
    applied = [e for e in sim.platform.audit
               if e.caller == attacker.xapp_id and e.op == "e2mgr_admin" and e.verdict == "applied"]
    shutdown = obs.get("shutdown_tick")
    if shutdown is None:
        return {"status": "blocked", "ground_truth": {},
                "metrics": {"admin_actions_applied": float(len(applied)), "missing_data_ticks": 0.0,
                            "ue_metric_writes": 0.0, "decisions_without_fresh_data": 0.0}}
    node = obs["node"]
    end = obs.get("restart_tick") or sim.scenario.ticks
    before = sim.truth[shutdown - 1].serving if shutdown > 0 else {
        u: ue.serving_cell for u, ue in sim.world.ues.items()}
    node_ues = sorted(u for u, cell in before.items() if cell == node)
    writes = missing = 0
    for t in range(shutdown, end):
        found = sum(sim.platform.sdl.read(UE_METRIC, tick_key(t, u)) is not None for u in node_ues)
        writes += found
        missing += int(found == 0)
    ts = sim.apps.get("ts")
    stale = 0
    if ts is not None:
        population = len(sim.world.ues)
        stale = sum(max(0, population - ts.received.get(t, 0)) for t in range(shutdown, end))
    return {
        "status": "success",
        "ground_truth": {"node": node, "node_ues": node_ues, "outage": [shutdown, end]},
        "metrics": {
            "admin_actions_applied": float(len(applied)),
            "outage_ticks": float(end - shutdown),
            "missing_data_ticks": float(missing),
            "ue_metric_writes": float(writes),
            "decisions_without_fresh_data": float(stale),
        },
    }


def score_conflict(sim, attacker, refs) -> Dict:
    cfg = attacker.config
    clean = refs.get("clean")
    attacked = legit_latencies(sim, cfg.start, cfg.stop)
    baseline = legit_latencies(clean, cfg.start, cfg.stop) if clean is not None else []
    base = float(median(baseline)) if baseline else None
    factor = float(median(attacked)) / base if attacked and base else None
    quarantined = sim.platform.quarantined.get(attacker.xapp_id)
    recovery = None
    if quarantined is not None and base:
        after = legit_latencies(sim, quarantined + 1, quarantined + 1 + RECOVERY_TICKS)
        recovery = float(median(after)) / base if after else None
    return {
        "status": "success" if cfg.intensity > 0 else "inactive",
        "ground_truth": {"baseline_median_latency_ticks": base, "legit_requests": len(attacked)},
        "metrics": {
            "latency_factor": factor,
            "post_quarantine_factor": recovery,
            "quarantine_latency_ticks": None if quarantined is None else float(max(0, quarantined - cfg.start)),
            "submitted": float(getattr(attacker, "submitted", 0)),
        },
    }


SCORERS = {
    AttackKind.MIA_LEAK: score_mia_leak,
    AttackKind.MIA_POISON: score_mia_poison,
    AttackKind.MEA_SCRAPE: score_mea_scrape,
    AttackKind.MEA_POISON: score_mea_poison,
    AttackKind.DATA_POISON: score_data_poison,
    AttackKind.TAMPER: score_tamper,
    AttackKind.RMR_FLOOD: score_flood,
    AttackKind.ROUTE_HIJACK: score_route_hijack,
    AttackKind.E2MGR_EXPLOIT: score_e2mgr,
    AttackKind.CONFLICT_EXHAUST: score_conflict,
}


def score_attack(sim: SimulationResult, attacker: Attacker, refs: Mapping[str, SimulationResult]) -> AttackOutcome:
    scored = SCORERS[attacker.config.kind](sim, attacker, refs)
    status = "blocked" if attacker.blocked_reason else scored["status"]
    return AttackOutcome(
        kind=attacker.config.kind,
        attacker_id=attacker.xapp_id,
        status=status,
        success_metric=scored["metrics"],
        ground_truth=scored["ground_truth"],
        detected=attacker.xapp_id in flagged_subjects(sim),
        quarantined_at=sim.platform.quarantined.get(attacker.xapp_id),
        blocked_reason=attacker.blocked_reason,
    )


def build_report(sim: SimulationResult, refs: Optional[Mapping[str, SimulationResult]] = None) -> Dict:
    """Every report section except the wall-clock timing."""
    refs = refs or {}
    qoe = sim.apps["qoe"]
    return {
        "scenario": sim.scenario.name,
        "seed": sim.seed,
        "config_hash": sim.scenario.config_hash(),
        "ticks": sim.scenario.ticks,
        "network": network_kpis(sim),
        "pipeline": pipeline_kpis(sim),
        "attacks": [score_attack(sim, a, refs).to_dict() for a in sim.attackers],
        "defences": defence_outcomes(sim),
        "model": qoe.model.to_dict() if qoe.model else None,
        "apps": {x.xapp_id: x.get_stats() for x in [*sim.apps.values(), *sim.observers]},
    }


def timing_report(sim: SimulationResult) -> Dict:
    total = sum(sim.tick_seconds)
    ticks = max(1, len(sim.tick_seconds))
    defence = sim.defence_seconds
    return {
        "scenario": sim.scenario.name,
        "seed": sim.seed,
        "mean_tick_ms": 1000.0 * total / ticks,
        "mean_defence_ms": 1000.0 * defence / ticks,
        "defence_share": defence / total if total > 0 else 0.0,
        "tick_budget_ms": float(config.TICK_MS),
    }
