class DefenceError(Exception):
    """Base class for defence-layer errors."""


class EmptyTraceError(DefenceError):
    """Audit trace is empty or too short to build behaviour profiles."""


class UnknownProfileError(DefenceError):
    """No behaviour profile exists for the subject."""
