import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Mapping, Optional


class AttackKind(str, Enum):
    MIA_LEAK = "MIA_LEAK"
    MIA_POISON = "MIA_POISON"
    MEA_SCRAPE = "MEA_SCRAPE"
    MEA_POISON = "MEA_POISON"
    DATA_POISON = "DATA_POISON"
    TAMPER = "TAMPER"
    RMR_FLOOD = "RMR_FLOOD"
    ROUTE_HIJACK = "ROUTE_HIJACK"
    E2MGR_EXPLOIT = "E2MGR_EXPLOIT"
    CONFLICT_EXHAUST = "CONFLICT_EXHAUST"


# success metrics bounded to [0, 1]; every other metric must be >= 0 or None
UNIT_METRICS = frozenset({
    "auc", "fidelity", "redirect_fraction", "denial_rate", "post_quarantine_denial_rate",
    "altered_fraction", "member_score_mean", "non_member_score_mean",
})
SIGNED_METRICS = frozenset({"shift", "control_shift", "rmse_delta", "weight_error"})


@dataclass(frozen=True)
class AttackConfig:
    kind: AttackKind
    attacker_id: str
    target: Optional[str] = None
    intensity: float = 1.0  # rate per tick, fraction, perturbation size or probe count by kind
    start: int = 0
    stop: int = 1  # exclusive
    params: Mapping = field(default_factory=dict)
    manifest: Optional[Mapping] = None  # overrides the kind's default permission manifest

    def __post_init__(self):
        if self.intensity < 0:
            raise ValueError(f"{self.attacker_id}: intensity must be >= 0")
        if self.start < 0 or self.start >= self.stop:
            raise ValueError(f"{self.attacker_id}: need 0 <= start < stop, got [{self.start}, {self.stop})")

    def window(self, tick: int) -> bool:
        return self.start <= tick < self.stop


@dataclass
class AttackOutcome:
    """
    Quantified result of one attack in one run.

    status is "success" when the attack ran to completion, "blocked" when a
    defence denied it, "inconclusive" when the observation it needed never
    happened (e.g. no retrain in the window) and "inactive" for a null attack.
    """

    kind: AttackKind
    attacker_id: str
    status: str
    success_metric: Dict[str, Optional[float]] = field(default_factory=dict)
    ground_truth: Dict = field(default_factory=dict)
    detected: bool = False
    quarantined_at: Optional[int] = None
    blocked_reason: Optional[str] = None

    def __post_init__(self):
        for name, value in self.success_metric.items():
            if value is None or name in SIGNED_METRICS:
                continue
            if not math.isfinite(value) or value < 0:
                raise ValueError(f"{self.kind.value}: metric {name}={value} out of range")
            if name in UNIT_METRICS and value > 1:
                raise ValueError(f"{self.kind.value}: metric {name}={value} not in [0, 1]")

    @property
    def blocked(self) -> bool:
        return self.status == "blocked"

    def to_dict(self) -> Dict:
        return {
            "kind": self.kind.value,
            "attacker_id": self.attacker_id,
            "status": self.status,
            "success_metric": dict(sorted(self.success_metric.items())),
            "ground_truth": self.ground_truth,
            "detected": self.detected,
            "quarantined_at": self.quarantined_at,
            "blocked_reason": self.blocked_reason,
        }
