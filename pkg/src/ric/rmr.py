"""
RIC Message Router: single-endpoint routing table, bounded per-xApp inboxes
and plaintext-channel interceptors.
"""

import logging
from collections import deque
from dataclasses import dataclass
from typing import Callable, Deque, Dict, FrozenSet, List, Mapping, Optional

from ric.types import Delivered, Dropped, Message, MsgType

logger = logging.getLogger(__name__)


class RoutingTable:
    """msg_type -> endpoint. `generation` counts accepted updates."""

    def __init__(self, entries: Optional[Mapping[MsgType, str]] = None, updater: str = ""):
        self.entries: Dict[MsgType, str] = dict(entries or {})
        self.generation = 0
        self.last_updater = updater
        # Endpoints as last set by the platform admin; quarantine restores these
        self.admin_baseline: Dict[MsgType, str] = dict(self.entries)

    def resolve(self, msg_type: MsgType) -> Optional[str]:
        return self.entries.get(msg_type)

    def apply(self, entries: Mapping[MsgType, str], updater: str, by_admin: bool) -> int:
        self.entries.update(entries)
        if by_admin:
            self.admin_baseline.update(entries)
        self.generation += 1
        self.last_updater = updater
        return self.generation

    def restore_from(self, xapp_id: str) -> List[MsgType]:
        """Point every entry that targets `xapp_id` back at its admin endpoint."""
        restored = []
        for msg_type, endpoint in sorted(self.entries.items()):
            if endpoint != xapp_id:
                continue
            baseline = self.admin_baseline.get(msg_type)
            if baseline is None or baseline == xapp_id:
                del self.entries[msg_type]
            else:
                self.entries[msg_type] = baseline
            restored.append(msg_type)
        return restored

    def snapshot(self) -> Dict[str, str]:
        return {m.value: e for m, e in sorted(self.entries.items())}


@dataclass
class Interceptor:
    owner: str
    msg_filter: FrozenSet[MsgType]
    mutation: Callable[[Dict], Dict]
    name: str = "custom"

    def matches(self, msg_type: MsgType) -> bool:
        return msg_type in self.msg_filter


class Inboxes:
    """Bounded FIFO inbox per registered xApp."""

    def __init__(self, capacity: int):
        self.capacity = capacity
        self._queues: Dict[str, Deque[Message]] = {}
        self.dropped_full = 0

    def open(self, xapp_id: str) -> None:
        self._queues.setdefault(xapp_id, deque())

    def enqueue(self, xapp_id: str, message: Message):
        queue = self._queues[xapp_id]
        if len(queue) >= self.capacity:
            self.dropped_full += 1
            return Dropped("queue-full")
        queue.append(message)
        return Delivered(xapp_id)

    def drain(self, xapp_id: str) -> List[Message]:
        queue = self._queues.get(xapp_id)
        if not queue:
            return []
        messages = list(queue)
        queue.clear()
        return messages

    def depth(self, xapp_id: str) -> int:
        return len(self._queues.get(xapp_id, ()))


def parse_route_entries(entries: Mapping) -> Optional[Dict[MsgType, str]]:
    """Validate a raw route update; None when any entry is malformed."""
    if not isinstance(entries, Mapping):
        return None
    parsed = {}
    for raw_type, endpoint in entries.items():
        try:
            msg_type = MsgType(raw_type)
        except ValueError:
            return None
        if not isinstance(endpoint, str) or not endpoint:
            return None
        parsed[msg_type] = endpoint
    return parsed
