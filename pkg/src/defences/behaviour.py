"""
Behavioural profiling of xApps from the platform audit trace, plus manifest
risk scoring.
"""

from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Dict, Iterable, Mapping, Optional, Sequence, Tuple

import numpy as np

import config
from defences.errors import EmptyTraceError, UnknownProfileError
from ric.types import AuditEntry, XAppDescriptor

SDL_OPS = ("sdl_read", "sdl_write", "sdl_scan")

_OP_KEYS = {
    "e2_subscribe": "e2:subscribe",
    "e2_control": "e2:control",
    "e2mgr_admin": "e2:admin",
    "rmr_update_routes": "route:update",
    "intercept_channel": "channel:intercept",
}


def rate_key(entry: AuditEntry) -> Optional[str]:
    """Tracked rate a single audit entry counts towards, if any."""
    if entry.op in SDL_OPS:
        return f"sdl:{entry.detail.get('namespace', entry.resource.split('/', 1)[0])}"
    if entry.op == "rmr_send":
        return f"send:{entry.resource}"
    return _OP_KEYS.get(entry.op)


@dataclass(frozen=True)
class BehaviourProfile:
    xapp_id: str
    ticks: int
    rates: Mapping[str, Tuple[float, float]]  # key -> (mean, stddev) ops/tick
    read_write_ratio: float
    send_histogram: Mapping[str, int] = field(default_factory=dict)
    e2_rate: float = 0.0

    def to_dict(self) -> Dict:
        return {
            "xapp_id": self.xapp_id,
            "ticks": self.ticks,
            "rates": {k: [m, s] for k, (m, s) in sorted(self.rates.items())},
            "read_write_ratio": self.read_write_ratio,
            "send_histogram": dict(sorted(self.send_histogram.items())),
            "e2_rate": self.e2_rate,
        }


def tick_counts(trace: Iterable[AuditEntry], start: int, stop: int) -> Dict[str, Dict[int, Counter]]:
    """caller -> tick -> Counter(rate key) for entries in [start, stop)."""
    counts: Dict[str, Dict[int, Counter]] = defaultdict(lambda: defaultdict(Counter))
    for entry in trace:
        if not start <= entry.tick < stop:
            continue
        key = rate_key(entry)
        if key is not None:
            counts[entry.caller][entry.tick][key] += 1
    return counts


def profile_build(trace: Sequence[AuditEntry], xapp_ids: Optional[Iterable[str]] = None,
                  start: int = 0, stop: Optional[int] = None,
                  min_ticks: int = config.PROFILE_MIN_TICKS) -> Dict[str, BehaviourProfile]:
    """
    Per-xApp rate profiles over ticks [start, stop).

    Args:
        trace: audit entries of a benign window
        xapp_ids: subjects to profile (default: every caller in the trace)
        start, stop: tick span; stop defaults to one past the last traced tick
        min_ticks: shortest span accepted

    Raises:
        EmptyTraceError: empty trace or span shorter than min_ticks
    """
    if not trace:
        raise EmptyTraceError("cannot profile an empty audit trace")
    if stop is None:
        stop = max(e.tick for e in trace) + 1
    span = stop - start
    if span < min_ticks:
        raise EmptyTraceError(f"profile span {span} ticks is shorter than {min_ticks}")

    counts = tick_counts(trace, start, stop)
    subjects = sorted(set(xapp_ids) if xapp_ids is not None else counts)
    profiles = {}
    for xapp_id in subjects:
        per_tick = counts.get(xapp_id, {})
        keys = sorted({k for c in per_tick.values() for k in c})
        rates = {}
        for key in keys:
            series = np.zeros(span)
            for tick, c in per_tick.items():
                series[tick - start] = c.get(key, 0)
            rates[key] = (float(series.mean()), float(series.std()))

        reads = writes = 0
        sends: Counter = Counter()
        e2_ops = 0
        for entry in trace:
            if entry.caller != xapp_id or not start <= entry.tick < stop:
                continue
            if entry.op in ("sdl_read", "sdl_scan"):
                reads += 1
            elif entry.op == "sdl_write":
                writes += 1
            elif entry.op == "rmr_send":
                sends[entry.resource] += 1
            elif entry.op in ("e2_subscribe", "e2_control", "e2mgr_admin"):
                e2_ops += 1
        profiles[xapp_id] = BehaviourProfile(
            xapp_id=xapp_id,
            ticks=span,
            rates=rates,
            read_write_ratio=float(reads) / writes if writes else float(reads),
            send_histogram=dict(sends),
            e2_rate=e2_ops / span,
        )
    return profiles


def profile_score(profile: Optional[BehaviourProfile], live: Mapping[str, float],
                  epsilon: float = config.PROFILE_EPSILON) -> Tuple[float, Optional[str]]:
    """
    Max z-like deviation of `live` rates from the profile, and the key that produced it.

    Keys missing from the profile are treated as mean 0, stddev 0.

    Raises:
        UnknownProfileError: no profile for the subject
    """
    if profile is None:
        raise UnknownProfileError("no behaviour profile for subject")
    best, best_key = 0.0, None
    for key in sorted(set(profile.rates) | set(live)):
        mean, std = profile.rates.get(key, (0.0, 0.0))
        score = abs(live.get(key, 0.0) - mean) / max(std, epsilon)
        if score > best:
            best, best_key = score, key
    return best, best_key


def risk_points(descriptor: XAppDescriptor, weights: Mapping[str, int] = None) -> int:
    weights = weights or config.RISK_WEIGHTS
    return (
        weights["write"] * len(descriptor.write_namespaces)
        + weights["e2_control"] * int(descriptor.e2_control)
        + weights["route_update"] * int(descriptor.route_update)
    )


def risk_score_manifest(descriptor: XAppDescriptor, weights: Mapping[str, int] = None) -> str:
    """LOW (<= 1), MEDIUM (2-3) or HIGH (>= 4)."""
    points = risk_points(descriptor, weights)
    if points <= 1:
        return "LOW"
    if points <= 3:
        return "MEDIUM"
    return "HIGH"


def live_rates(window: Sequence[Counter]) -> Dict[str, float]:
    """Mean per-tick count of every key seen in the window."""
    if not window:
        return {}
    totals: Counter = Counter()
    for counts in window:
        totals.update(counts)
    return {key: total / len(window) for key, total in totals.items()}
