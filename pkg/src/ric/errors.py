class RicError(Exception):
    """Base class for Near-RT RIC platform errors."""


class UnknownXAppError(RicError):
    """Caller is not registered on the platform."""


class DuplicateXAppError(RicError):
    """An xApp with this id is already registered."""


class AccessDeniedError(RicError):
    """Operation denied by access control, zero trust or quarantine. No data is returned."""

    def __init__(self, caller: str, op: str, resource: str, reason: str):
        super().__init__(f"{caller}: {op} on {resource} denied ({reason})")
        self.caller = caller
        self.op = op
        self.resource = resource
        self.reason = reason


class UnknownNodeError(RicError):
    """No E2 node with this id."""


class InvalidRequestError(RicError):
    """Malformed platform request (bad report period, bad control action)."""


class DuplicateRequestError(RicError):
    """Control request id was already submitted in this run."""


class CapabilityUnavailableError(RicError):
    """Capability does not exist under the current channel security setting."""
