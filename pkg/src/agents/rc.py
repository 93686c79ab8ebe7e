import logging
from typing import Mapping, Optional

from agents.base import XApp
from ric.errors import AccessDeniedError, DuplicateRequestError
from ric.types import MsgType, RicControlRequest, XAppDescriptor

logger = logging.getLogger(__name__)


def rc_descriptor(xapp_id: str = "rc", zone: str = "control") -> XAppDescriptor:
    return XAppDescriptor(
        xapp_id=xapp_id,
        receives=(MsgType.TS_CONTROL.value,),
        e2_control=True,
        zone=zone,
    )


class RanControl(XApp):
    """Turns TS_CONTROL messages into RIC Control Requests on the E2 interface."""

    def __init__(self, platform, xapp_id: str = "rc"):
        super().__init__(platform, rc_descriptor(xapp_id))

    def tick(self, tick: int) -> None:
        for message in self.receive():
            if message.msg_type == MsgType.TS_CONTROL:
                self.rc_execute(message.payload, tick)

    def rc_execute(self, payload: Mapping, tick: int) -> Optional[RicControlRequest]:
        request = RicControlRequest(
            request_id=str(payload["request_id"]),
            issuer=self.xapp_id,
            ue_id=str(payload["ue_id"]),
            target_cell=str(payload["target_cell"]),
            priority=int(payload["priority"]),
            tick=tick,
        )
        try:
            self.platform.e2_control(request)
        except (AccessDeniedError, DuplicateRequestError) as e:
            logger.warning("tick %d: control %s not submitted: %s", tick, request.request_id, e)
            self.stats["failed"] += 1
            return None
        self.stats["submitted"] += 1
        return request
