class RanError(Exception):
    """Base class for RAN simulation errors."""


class DegenerateGeometryError(RanError):
    """UE and cell share a position, path loss is undefined."""


class CellOfflineError(RanError):
    """Operation needs an online cell."""


class UnknownEntityError(RanError):
    """Unknown UE or cell id."""


class InvalidSharingError(RanError):
    """Throughput requested for fewer than one sharing UE."""
