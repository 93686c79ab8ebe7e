"""
Zero-trust primitives: keyed identity tokens and zone microsegmentation.
"""

import hashlib
import hmac
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, Optional, Tuple

import numpy as np


@dataclass(frozen=True)
class IdentityToken:
    xapp_id: str
    nonce: str
    mac: str  # hex HMAC-SHA256 over (xapp_id, nonce)


def _mac(key: bytes, xapp_id: str, nonce: str) -> str:
    return hmac.new(key, f"{xapp_id}|{nonce}".encode(), hashlib.sha256).hexdigest()


def token_verify(key: bytes, token: Optional[IdentityToken], claimed_sender: str) -> bool:
    if not isinstance(token, IdentityToken) or token.xapp_id != claimed_sender:
        return False
    return hmac.compare_digest(_mac(key, token.xapp_id, token.nonce), token.mac)


class TokenAuthority:
    """Issues and verifies identity tokens under one run key."""

    def __init__(self, key: bytes, rng: np.random.Generator):
        self._key = key
        self._rng = rng

    @classmethod
    def from_seed(cls, seed: int, rng: np.random.Generator) -> "TokenAuthority":
        key = hashlib.sha256(f"ricsim-platform-key:{seed}".encode()).digest()
        return cls(key, rng)

    def issue(self, xapp_id: str) -> IdentityToken:
        nonce = f"{int(self._rng.integers(0, 2**62)):016x}"
        return IdentityToken(xapp_id=xapp_id, nonce=nonce, mac=_mac(self._key, xapp_id, nonce))

    def verify(self, token: Optional[IdentityToken], claimed_sender: str) -> bool:
        return token_verify(self._key, token, claimed_sender)


@dataclass
class ZoneGraph:
    membership: Dict[str, str] = field(default_factory=dict)
    edges: FrozenSet[Tuple[str, str]] = frozenset()

    @classmethod
    def from_edges(cls, edges: Iterable[Tuple[str, str]]) -> "ZoneGraph":
        return cls(edges=frozenset((a, b) for a, b in edges))

    @property
    def zones(self) -> FrozenSet[str]:
        return frozenset(self.membership.values())

    def assign(self, xapp_id: str, zone: str) -> None:
        self.membership[xapp_id] = zone

    def zone_of(self, xapp_id: str) -> Optional[str]:
        return self.membership.get(xapp_id)


def segment_check(zones: ZoneGraph, src: str, dst: str) -> bool:
    """Allow iff both share a zone or a directed edge zone(src) -> zone(dst) exists."""
    src_zone, dst_zone = zones.zone_of(src), zones.zone_of(dst)
    if src_zone is None or dst_zone is None:
        return False
    return src_zone == dst_zone or (src_zone, dst_zone) in zones.edges
