"""
Report schema, canonical serialization and the compare table.
"""

import logging
import math
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator

import config
from harness.scenario import canonical_json

logger = logging.getLogger(__name__)


class ReportError(Exception):
    """Reports cannot be compared (different scenario families or malformed input)."""


class _Section(BaseModel):
    model_config = ConfigDict(extra="allow")


class NetworkKpis(_Section):
    mean_ue_throughput_mbps: float = Field(ge=0)
    p5_ue_throughput_mbps: float = Field(ge=0)
    p50_ue_throughput_mbps: float = Field(ge=0)
    p95_ue_throughput_mbps: float = Field(ge=0)
    handover_count: int = Field(ge=0)
    sla_violation_ticks: int = Field(ge=0)
    forbid_handovers: int = Field(ge=0)


class PipelineKpis(_Section):
    ts_decisions: int = Field(ge=0)
    median_control_latency_ticks: Optional[float] = Field(None, ge=1)
    median_control_latency_ms: Optional[float] = Field(None, ge=0)

    @model_validator(mode="after")
    def _latency_in_ms(self):
        ticks, ms = self.median_control_latency_ticks, self.median_control_latency_ms
        if (ticks is None) != (ms is None) or (ticks is not None and ms != ticks * config.TICK_MS):
            raise ValueError(f"latency ms must equal ticks x {config.TICK_MS}")
        return self


class DefenceOutcomes(_Section):
    alert_count: int = Field(ge=0)
    precision: float = Field(ge=0, le=1)
    recall: float = Field(ge=0, le=1)
    quarantines: Dict[str, int]
    flagged: List[str]
    attackers: List[str]


class MetricsReport(BaseModel):
    model_config = ConfigDict(extra="forbid")

    scenario: str
    seed: int
    config_hash: str = Field(pattern=r"^[0-9a-f]{12}:[0-9a-f]{16}$")
    ticks: int = Field(ge=1)
    network: NetworkKpis
    pipeline: PipelineKpis
    attacks: List[Dict[str, Any]]
    defences: DefenceOutcomes
    model: Optional[Dict[str, Any]]
    apps: Dict[str, Dict[str, Any]]

    @property
    def family(self) -> str:
        return self.config_hash.split(":", 1)[0]


def validate_report(report: Mapping) -> MetricsReport:
    return MetricsReport.model_validate(dict(report))


def to_json(report: Mapping) -> str:
    """Canonical report bytes: sorted keys, compact separators, no NaN."""
    return canonical_json(report)


def write_report(report: Mapping, timing: Mapping, out_dir, stem: str = "report") -> Tuple[Path, Path]:
    """
    Write `<stem>.json` and the `<stem>.timing.json` sidecar into `out_dir`.

    Raises:
        OSError: directory cannot be created or written
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    report_path = out / f"{stem}.json"
    timing_path = out / f"{stem}.timing.json"
    report_path.write_text(to_json(report) + "\n", encoding="utf-8")
    timing_path.write_text(canonical_json(timing) + "\n", encoding="utf-8")
    logger.info("report written to %s", report_path)
    return report_path, timing_path


# ----------------------------------------------------------------------
# Compare
# ----------------------------------------------------------------------

def _number(value: Any) -> Optional[float]:
    if isinstance(value, bool):
        return float(value)
    if isinstance(value, (int, float)) and math.isfinite(value):
        return float(value)
    return None


def flatten_metrics(report: Mapping) -> Dict[str, float]:
    """Numeric report metrics under dotted names; attack metrics keyed by attacker id."""
    flat: Dict[str, float] = {}
    for section in ("network", "pipeline", "defences"):
        for name, value in report.get(section, {}).items():
            number = _number(value)
            if number is not None:
                flat[f"{section}.{name}"] = number
    for outcome in report.get("attacks", []):
        prefix = f"attacks.{outcome['attacker_id']}"
        for name, value in outcome.get("success_metric", {}).items():
            number = _number(value)
            if number is not None:
                flat[f"{prefix}.{name}"] = number
        flat[f"{prefix}.detected"] = float(bool(outcome.get("detected")))
        flat[f"{prefix}.blocked"] = float(outcome.get("status") == "blocked")
    return flat


def report_family(report: Mapping) -> str:
    config_hash = report.get("config_hash")
    if not isinstance(config_hash, str) or ":" not in config_hash:
        raise ReportError(f"report {report.get('scenario', '?')} has no config hash")
    return config_hash.split(":", 1)[0]


def compare(baseline: Mapping, *variants: Mapping) -> List[Dict[str, Any]]:
    """
    One row per metric: the baseline value, then value, delta and ratio per variant.

    A metric missing from a report counts as 0 for deltas. Ratios are None
    when the baseline value is 0.

    Raises:
        ReportError: a variant belongs to a different scenario family
    """
    family = report_family(baseline)
    for variant in variants:
        if report_family(variant) != family:
            raise ReportError(
                f"cannot compare {variant.get('scenario')} ({report_family(variant)}) "
                f"with {baseline.get('scenario')} ({family})"
            )
    base = flatten_metrics(baseline)
    flats = [flatten_metrics(v) for v in variants]
    names = sorted(set(base).union(*flats))
    rows = []
    for name in names:
        reference = base.get(name, 0.0)
        row: Dict[str, Any] = {"metric": name, "baseline": base.get(name)}
        for i, flat in enumerate(flats):
            value = flat.get(name, 0.0)
            row[f"v{i}"] = flat.get(name)
            row[f"v{i}_delta"] = value - reference
            row[f"v{i}_ratio"] = value / reference if reference else None
        rows.append(row)
    return rows
