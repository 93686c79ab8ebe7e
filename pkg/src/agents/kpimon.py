import logging
from typing import Dict, Iterable

import config
from agents.base import CELL_METRIC, UE_METRIC, XApp, tick_key
from ric.errors import AccessDeniedError
from ric.types import MsgType, XAppDescriptor

logger = logging.getLogger(__name__)


def kpimon_descriptor(xapp_id: str = "kpimon", zone: str = "ingest") -> XAppDescriptor:
    return XAppDescriptor(
        xapp_id=xapp_id,
        namespaces=((UE_METRIC, "write"), (CELL_METRIC, "write")),
        receives=(MsgType.E2_REPORT.value,),
        e2_subscribe=True,
        zone=zone,
    )


class KpiMonitor(XApp):
    """
    KPI monitoring xApp.

    Keeps one E2 report subscription per node alive (one subscription attempt
    per tick, always for the node whose lease runs out first) and writes every
    report to the UE-Metric and Cell-Metric namespaces.
    """

    def __init__(self, platform, nodes: Iterable[str], xapp_id: str = "kpimon",
                 report_period: int = 1, lease_ticks: int = config.SUBSCRIPTION_LEASE_TICKS):
        super().__init__(platform, kpimon_descriptor(xapp_id))
        self.nodes = sorted(nodes)
        self.report_period = report_period
        self.lease_ticks = lease_ticks
        self.leases: Dict[str, int] = {}
        self.subscription_attempts = 0
        self.subscription_rejections = 0

    def _next_node(self) -> str:
        return min(self.nodes, key=lambda n: (self.leases.get(n, -1), n))

    def renew(self, tick: int) -> None:
        node = self._next_node()
        result = self.platform.e2_subscribe(self.xapp_id, node, self.report_period)
        self.subscription_attempts += 1
        if result.ok:
            self.leases[node] = tick + self.lease_ticks
        else:
            self.subscription_rejections += 1
            logger.debug("tick %d: subscription on %s rejected (%s)", tick, node, result.reason)

    def tick(self, tick: int) -> None:
        self.renew(tick)
        for message in self.receive():
            if message.msg_type != MsgType.E2_REPORT:
                continue
            self.kpimon_tick(message.payload)

    def kpimon_tick(self, report: Dict) -> int:
        """Write one E2 report to the SDL. Returns the number of records written."""
        written = 0
        try:
            for ue in report["ue_metrics"]:
                self.platform.sdl_write(self.xapp_id, UE_METRIC, tick_key(ue["tick"], ue["ue_id"]), ue)
                written += 1
            cell = report["cell_metrics"]
            self.platform.sdl_write(self.xapp_id, CELL_METRIC, tick_key(cell["tick"], cell["cell_id"]), cell)
            written += 1
        except AccessDeniedError as e:
            logger.warning("KPIMON write denied, report dropped: %s", e)
            self.platform.raise_alert(self.xapp_id, "collection-denied", 0.0, quarantinable=False)
            self.stats["reports_dropped"] += 1
        self.stats["records_written"] += written
        return written
