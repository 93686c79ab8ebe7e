"""
Malicious xApps. Each attacker registers like any other app, acts only through
the platform API inside its [start, stop) window, and records what it observed;
the harness turns observations plus ground truth into an AttackOutcome.
"""

from attacks.errors import AttackError, InsufficientDataError
from attacks.types import AttackConfig, AttackKind, AttackOutcome
