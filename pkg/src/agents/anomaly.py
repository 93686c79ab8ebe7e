import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Sequence

import numpy as np

import config
from agents.base import UE_METRIC, XApp, tick_prefix
from agents.errors import InsufficientWindowError
from ric.types import MsgType, XAppDescriptor

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class AnomalyReport:
    ue_id: str
    tick: int
    score: float
    threshold: float
    flagged: bool

    def to_dict(self) -> Dict:
        return {
            "ue_id": self.ue_id,
            "tick": self.tick,
            "score": self.score if math.isfinite(self.score) else "inf",
            "threshold": self.threshold,
            "flagged": self.flagged,
        }


def ad_detect(ue_id: str, window: Sequence[float], tick: int = 0,
              threshold: float = config.ANOMALY_THRESHOLD) -> AnomalyReport:
    """
    Score the latest sample of `window` against the samples before it.

    score = (latest - mean(prefix)) / std(prefix). A constant prefix scores 0 when
    the latest sample matches it and +inf otherwise.

    Raises:
        InsufficientWindowError: fewer than three samples
    """
    if len(window) < 3:
        raise InsufficientWindowError(f"window needs >= 3 samples, got {len(window)}")
    prefix = np.asarray(window[:-1], dtype=float)
    latest = float(window[-1])
    mean = float(prefix.mean())
    std = float(prefix.std())
    if std == 0.0:
        score = 0.0 if latest == mean else math.inf
    else:
        score = (latest - mean) / std
    return AnomalyReport(ue_id, tick, score, threshold, abs(score) > threshold)


def ad_descriptor(xapp_id: str = "ad", zone: str = "analytics") -> XAppDescriptor:
    return XAppDescriptor(
        xapp_id=xapp_id,
        namespaces=((UE_METRIC, "read"),),
        sends=(MsgType.ANOMALY_ALERT.value,),
        zone=zone,
    )


class AnomalyDetector(XApp):
    """Per-UE throughput z-score over the last `window` ticks of UE-Metric."""

    def __init__(self, platform, xapp_id: str = "ad", window: int = config.ANOMALY_WINDOW,
                 threshold: float = config.ANOMALY_THRESHOLD):
        super().__init__(platform, ad_descriptor(xapp_id))
        self.window = window
        self.threshold = threshold

    def tick(self, tick: int) -> None:
        series: Dict[str, List[float]] = {}
        current = set()
        for t in range(max(0, tick - self.window + 1), tick + 1):
            for record in self.platform.sdl_scan(self.xapp_id, UE_METRIC, tick_prefix(t)):
                series.setdefault(record.value["ue_id"], []).append(float(record.value["throughput_dl"]))
                if t == tick:
                    current.add(record.value["ue_id"])
        for ue_id in sorted(current):
            if len(series[ue_id]) < 3:
                continue
            report = ad_detect(ue_id, series[ue_id], tick, self.threshold)
            if report.flagged:
                self.send(MsgType.ANOMALY_ALERT, report.to_dict(), tick)
                self.stats["flagged"] += 1
