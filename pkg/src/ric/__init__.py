"""
Near-RT RIC platform: SDL, RMR, E2 manager, conflict manager and xApp registry.

Import the facade from `ric.platform`; this package only re-exports the
dependency-free types so defence modules can use them.
"""

from ric.errors import (
    AccessDeniedError,
    CapabilityUnavailableError,
    DuplicateRequestError,
    DuplicateXAppError,
    InvalidRequestError,
    RicError,
    UnknownNodeError,
    UnknownXAppError,
)
from ric.types import (
    AuditEntry,
    ControlOutcome,
    DefenceSettings,
    Delivered,
    Dropped,
    Message,
    MsgType,
    PlatformSettings,
    RicControlRequest,
    SdlRecord,
    XAppDescriptor,
)

__all__ = [
    "AccessDeniedError",
    "AuditEntry",
    "CapabilityUnavailableError",
    "ControlOutcome",
    "DefenceSettings",
    "Delivered",
    "Dropped",
    "DuplicateRequestError",
    "DuplicateXAppError",
    "InvalidRequestError",
    "Message",
    "MsgType",
    "PlatformSettings",
    "RicControlRequest",
    "RicError",
    "SdlRecord",
    "UnknownNodeError",
    "UnknownXAppError",
    "XAppDescriptor",
]
