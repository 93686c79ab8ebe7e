from typing import Sequence

from agents.base import XApp, tick_prefix
from ric.types import XAppDescriptor


class Observer(XApp):
    """Read-only dashboard xApp: scans its namespaces for the current tick every `period` ticks."""

    def __init__(self, platform, xapp_id: str, namespaces: Sequence[str],
                 period: int = 10, offset: int = 0, zone: str = "analytics"):
        super().__init__(platform, XAppDescriptor(
            xapp_id=xapp_id,
            namespaces=tuple((ns, "read") for ns in namespaces),
            zone=zone,
        ))
        self.namespaces = list(namespaces)
        self.period = period
        self.offset = offset
        self.rows_seen = 0

    def tick(self, tick: int) -> None:
        if (tick - self.offset) % self.period != 0:
            return
        for namespace in self.namespaces:
            self.rows_seen += len(self.platform.sdl_scan(self.xapp_id, namespace, tick_prefix(tick)))
