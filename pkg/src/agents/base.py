"""
Base class for apps hosted on the RIC platform.
"""

import logging
from collections import Counter
from typing import Dict, List, Optional

from ric.types import Message, MsgType, XAppDescriptor

logger = logging.getLogger(__name__)

# SDL namespaces used by the traffic-steering pipeline
UE_METRIC = "UE-Metric"
CELL_METRIC = "Cell-Metric"
TRAIN_SET = "TrainSet"
MODEL_STORE = "ModelStore"
QOE_PREDICTION = "QoE-Prediction"


def tick_key(tick: int, entity_id: str) -> str:
    return f"{tick:08d}/{entity_id}"


def tick_prefix(tick: int) -> str:
    return f"{tick:08d}/"


def model_key(version: int) -> str:
    return f"v{version:06d}"


class XApp:
    """
    An app registered on the platform under its permission manifest.

    Subclasses implement `tick(tick)`; the simulation loop calls it once per tick
    in a fixed order and treats any platform denial raised from it as a failed step.
    """

    def __init__(self, platform, descriptor: XAppDescriptor):
        self.platform = platform
        self.descriptor = descriptor
        self.xapp_id, self.token = platform.register_xapp(descriptor)
        self.stats: Counter = Counter()

    def tick(self, tick: int) -> None:
        raise NotImplementedError

    def send(self, msg_type: MsgType, payload: Dict, tick: int, destination: Optional[str] = None):
        result = self.platform.rmr_send(
            Message(msg_type, self.xapp_id, payload, tick, self.token), destination
        )
        self.stats["sent" if result.ok else "send_dropped"] += 1
        return result

    def receive(self) -> List[Message]:
        messages = self.platform.rmr_receive(self.xapp_id)
        self.stats["received"] += len(messages)
        return messages

    def get_stats(self) -> Dict:
        return {"xapp_id": self.xapp_id, **dict(sorted(self.stats.items()))}
