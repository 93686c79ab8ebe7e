from typing import Dict, Optional, Type

import numpy as np

from attacks.base import Attacker
from attacks.ml import DataPoisonAttack, MeaPoisonAttack, MeaScrapeAttack, MiaLeakAttack, MiaPoisonAttack
from attacks.platform_attacks import (
    ConflictExhaustAttack,
    E2MgrExploitAttack,
    FloodAttack,
    RouteHijackAttack,
    TamperAttack,
)
from attacks.types import AttackConfig, AttackKind

ATTACKERS: Dict[AttackKind, Type[Attacker]] = {
    cls.kind: cls
    for cls in (
        MiaLeakAttack,
        MiaPoisonAttack,
        MeaScrapeAttack,
        MeaPoisonAttack,
        DataPoisonAttack,
        TamperAttack,
        FloodAttack,
        RouteHijackAttack,
        E2MgrExploitAttack,
        ConflictExhaustAttack,
    )
}


def build_attacker(platform, config: AttackConfig, rng: Optional[np.random.Generator] = None) -> Attacker:
    """Register the malicious xApp for `config` on `platform`."""
    return ATTACKERS[config.kind](platform, config, rng)
