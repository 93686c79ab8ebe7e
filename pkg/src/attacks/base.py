"""
Base class for malicious xApps.
"""

import logging
from typing import Dict, Optional

import numpy as np

from agents.base import XApp
from attacks.types import AttackConfig, AttackKind
from ric.types import XAppDescriptor

logger = logging.getLogger(__name__)


class Attacker(XApp):
    """
    A malicious xApp. It registers under a plausible manifest and only ever
    acts through the platform API.

    The simulation calls three hooks per tick, each at a fixed point of the app
    order: `act` before KPIMON, `after_collection` between KPIMON and the QoE
    xApp, and `relay` after the analytics apps and before traffic steering.

    Args:
        platform: RicPlatform
        config: attack parameters and window
        rng: the attacker's own random stream
    """

    kind: AttackKind = None

    def __init__(self, platform, config: AttackConfig, rng: Optional[np.random.Generator] = None):
        self.config = config
        self.rng = rng if rng is not None else np.random.default_rng(0)
        self.blocked_reason: Optional[str] = None
        self.blocked_tick: Optional[int] = None
        self.observations: Dict = {}
        super().__init__(platform, self.manifest(config))

    @classmethod
    def default_manifest(cls, config: AttackConfig) -> XAppDescriptor:
        return XAppDescriptor(xapp_id=config.attacker_id, zone="analytics")

    @classmethod
    def manifest(cls, config: AttackConfig) -> XAppDescriptor:
        if config.manifest is not None:
            return XAppDescriptor.from_dict({**config.manifest, "xapp_id": config.attacker_id})
        return cls.default_manifest(config)

    @property
    def params(self) -> Dict:
        return dict(self.config.params)

    def active(self, tick: int) -> bool:
        return (self.config.window(tick) and self.blocked_reason is None
                and not self.platform.is_quarantined(self.xapp_id))

    def block(self, reason: str, tick: int) -> None:
        if self.blocked_reason is None:
            self.blocked_reason = reason
            self.blocked_tick = tick
            logger.info("tick %d: %s attack by %s blocked (%s)", tick, self.config.kind.value,
                        self.xapp_id, reason)

    def tick(self, tick: int) -> None:
        self.act(tick)

    def act(self, tick: int) -> None:
        pass

    def after_collection(self, tick: int) -> None:
        pass

    def relay(self, tick: int) -> None:
        pass

    def finish(self, tick: int) -> None:
        """Called once after the last tick."""

    def get_stats(self) -> Dict:
        return {**super().get_stats(), "kind": self.config.kind.value,
                "blocked": self.blocked_reason}
