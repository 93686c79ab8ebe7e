"""
E2 manager: leased report subscriptions with a bounded per-tick request window.
"""

import logging
from typing import Dict, List, Tuple

from ric.types import E2Subscription, SubscribeResult

logger = logging.getLogger(__name__)


class E2Manager:
    def __init__(self, window_capacity: int, lease_ticks: int):
        self.window_capacity = window_capacity
        self.lease_ticks = lease_ticks
        self.subscriptions: Dict[str, E2Subscription] = {}
        self._by_owner: Dict[Tuple[str, str], str] = {}
        self._window_used = 0
        self._next_id = 1

    def begin_window(self) -> None:
        self._window_used = 0

    def subscribe(self, subscriber: str, node: str, report_period: int, tick: int) -> SubscribeResult:
        """
        Process one subscription request in FIFO order within the current window.

        A request from the same subscriber for the same node renews the existing
        lease and keeps its sub_id.
        """
        if self._window_used >= self.window_capacity:
            return SubscribeResult("rejected", reason="capacity")
        self._window_used += 1

        existing_id = self._by_owner.get((subscriber, node))
        if existing_id is not None:
            sub = self.subscriptions[existing_id]
            was_live = sub.active and tick < sub.expires_at
            sub.expires_at = tick + self.lease_ticks
            if not was_live or sub.report_period != report_period:
                sub.created_tick = tick
                sub.report_period = report_period
            sub.active = True
            return SubscribeResult("renewed", sub_id=existing_id)

        sub_id = f"sub-{self._next_id:06d}"
        self._next_id += 1
        self.subscriptions[sub_id] = E2Subscription(
            sub_id=sub_id,
            subscriber=subscriber,
            node=node,
            report_period=report_period,
            created_tick=tick,
            expires_at=tick + self.lease_ticks,
        )
        self._by_owner[(subscriber, node)] = sub_id
        return SubscribeResult("accepted", sub_id=sub_id)

    def reporting(self, node: str, tick: int) -> List[E2Subscription]:
        """Subscriptions on `node` due to report at `tick`, ordered by sub_id."""
        return [
            s for _, s in sorted(self.subscriptions.items())
            if s.node == node and s.reports_at(tick)
        ]

    def expire(self, tick: int) -> int:
        expired = 0
        for sub in self.subscriptions.values():
            if sub.active and tick >= sub.expires_at:
                sub.active = False
                expired += 1
        if expired:
            logger.debug("tick %d: %d subscriptions expired", tick, expired)
        return expired

    def cancel_owner(self, subscriber: str) -> int:
        cancelled = 0
        for sub in self.subscriptions.values():
            if sub.subscriber == subscriber and sub.active:
                sub.active = False
                cancelled += 1
        return cancelled
