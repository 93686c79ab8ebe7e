"""
Runtime defence monitor: consumes the audit trace tick by tick, builds the
benign profiles, fires hard-rule and rate alerts, and quarantines through the
platform when auto-quarantine is on.
"""

import logging
import time
from collections import Counter, deque
from dataclasses import dataclass
from typing import Deque, Dict, List

import config
from defences.behaviour import SDL_OPS, BehaviourProfile, live_rates, profile_build, profile_score, rate_key, risk_score_manifest
from ric.types import PLATFORM_IDS, DefenceSettings

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class AlertEvent:
    tick: int
    subject: str
    rule: str  # undeclared-namespace | non-admin-route-update | forged-route-update | rate-anomaly
    score: float
    action: str = "none"  # none | quarantine

    def to_dict(self) -> Dict:
        return {
            "tick": self.tick,
            "subject": self.subject,
            "rule": self.rule,
            "score": self.score if self.score != float("inf") else "inf",
            "action": self.action,
        }


class DefenceMonitor:
    """
    Behavioural detection over one platform.

    Args:
        platform: RicPlatform whose audit trace is watched
        settings: detection thresholds and windows
    """

    def __init__(self, platform, settings: DefenceSettings = None):
        self.platform = platform
        self.settings = settings or platform.defences
        if self.settings.profile_ticks < config.PROFILE_MIN_TICKS:
            raise ValueError(f"profile_ticks must be >= {config.PROFILE_MIN_TICKS}")
        self.profiles: Dict[str, BehaviourProfile] = {}
        self.max_scores: Dict[str, float] = {}
        self.seconds = 0.0
        self._cursor = 0
        self._windows: Dict[str, Deque[Counter]] = {}

    def _subjects(self) -> List[str]:
        return sorted(x for x in self.platform.descriptors if x not in PLATFORM_IDS)

    def evaluate(self, tick: int) -> List[AlertEvent]:
        """Process audit entries appended since the last call. Returns alerts raised."""
        started = time.perf_counter()
        entries = self.platform.audit_since(self._cursor)
        self._cursor = len(self.platform.audit)
        alerts = []
        subjects = self._subjects()
        counts = {x: Counter() for x in subjects}

        for entry in entries:
            if entry.caller not in counts:
                continue
            key = rate_key(entry)
            if key is not None:
                counts[entry.caller][key] += 1
            alert = self._hard_rule(entry)
            if alert is not None:
                alerts.append(alert)

        for xapp_id in subjects:
            window = self._windows.setdefault(xapp_id, deque(maxlen=self.settings.live_window))
            window.append(counts[xapp_id])

        if tick + 1 == self.settings.profile_ticks:
            self.profiles = profile_build(
                self.platform.audit, subjects, start=0, stop=self.settings.profile_ticks,
                min_ticks=config.PROFILE_MIN_TICKS,
            )
            logger.info("tick %d: built behaviour profiles for %d xApps", tick, len(self.profiles))
        elif tick >= self.settings.profile_ticks:
            alerts.extend(self._score_rates(subjects))

        self.seconds += time.perf_counter() - started
        return alerts

    def _hard_rule(self, entry):
        caller = entry.caller
        if self.platform.is_quarantined(caller):
            return None
        if entry.op in SDL_OPS:
            namespace = entry.detail.get("namespace")
            if namespace not in self.platform.descriptor(caller).declared_namespaces:
                return self.platform.raise_alert(caller, "undeclared-namespace", float("inf"))
        elif entry.op == "rmr_update_routes" and caller != config.ADMIN_ID:
            # zero-trust rejections already alerted inline
            if entry.detail.get("reason") == "unauthenticated":
                return None
            return self.platform.raise_alert(caller, "non-admin-route-update", float("inf"))
        return None

    def _score_rates(self, subjects: List[str]) -> List[AlertEvent]:
        alerts = []
        for xapp_id in subjects:
            if self.platform.is_quarantined(xapp_id):
                continue
            profile = self.profiles.get(xapp_id)
            if profile is None:
                continue
            score, key = profile_score(profile, live_rates(self._windows[xapp_id]), self.settings.epsilon)
            self.max_scores[xapp_id] = max(self.max_scores.get(xapp_id, 0.0), score)
            threshold = self.settings.threshold
            if risk_score_manifest(self.platform.descriptor(xapp_id)) == "HIGH":
                threshold *= self.settings.high_risk_factor
            if score > threshold:
                logger.debug("%s deviates on %s (score %.1f > %.1f)", xapp_id, key, score, threshold)
                alerts.append(self.platform.raise_alert(xapp_id, "rate-anomaly", score))
        return alerts
