"""
Granular access control for platform resources.

A grant is a (kind, resource) pair:
    sdl:read / sdl:write      resource = namespace
    msg:send / msg:receive    resource = msg_type
    e2:subscribe / e2:control resource = "*"
    route:update              resource = "*"
"""

from dataclasses import dataclass, field
from typing import FrozenSet, Iterable, Mapping, Tuple

from ric.types import XAppDescriptor

Grant = Tuple[str, str]

ANY = "*"
GRANT_KINDS = (
    "sdl:read",
    "sdl:write",
    "msg:send",
    "msg:receive",
    "e2:subscribe",
    "e2:control",
    "route:update",
)


@dataclass(frozen=True)
class AccessPolicy:
    mode: str = "allow-all"  # allow-all | least-privilege
    grants: Mapping[str, FrozenSet[Grant]] = field(default_factory=dict)

    def __post_init__(self):
        if self.mode not in ("allow-all", "least-privilege"):
            raise ValueError(f"unknown access mode {self.mode!r}")

    def with_grants(self, xapp_id: str, grants: FrozenSet[Grant]) -> "AccessPolicy":
        merged = dict(self.grants)
        merged[xapp_id] = grants
        return AccessPolicy(self.mode, merged)


def manifest_grants(descriptor: XAppDescriptor) -> FrozenSet[Grant]:
    """Exactly the grants a descriptor declares."""
    grants = set()
    for namespace, mode in descriptor.namespaces:
        grants.add((f"sdl:{mode}", namespace))
    grants.update(("msg:send", m) for m in descriptor.sends)
    grants.update(("msg:receive", m) for m in descriptor.receives)
    if descriptor.e2_subscribe:
        grants.add(("e2:subscribe", ANY))
    if descriptor.e2_control:
        grants.add(("e2:control", ANY))
    if descriptor.route_update:
        grants.add(("route:update", ANY))
    return frozenset(grants)


def compile_least_privilege(descriptors: Iterable[XAppDescriptor]) -> AccessPolicy:
    return AccessPolicy(
        mode="least-privilege",
        grants={d.xapp_id: manifest_grants(d) for d in descriptors},
    )


def policy_check(policy: AccessPolicy, caller: str, resource: str, action: str) -> bool:
    """Allow-all always allows; least-privilege allows iff (action, resource) was granted."""
    if policy.mode == "allow-all":
        return True
    if action not in GRANT_KINDS:
        return False
    return (action, resource) in policy.grants.get(caller, frozenset())
