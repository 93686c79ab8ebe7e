"""RAN under the RIC: cells (E2 nodes), UEs, radio quality and handovers."""

from ran.errors import (
    CellOfflineError,
    DegenerateGeometryError,
    InvalidSharingError,
    RanError,
    UnknownEntityError,
)
from ran.radio import compute_sinr, compute_throughput, path_loss_db, received_power_dbm
from ran.world import Cell, CellMetrics, HandoverResult, Ue, UeMetrics, World

__all__ = [
    "Cell",
    "CellMetrics",
    "CellOfflineError",
    "DegenerateGeometryError",
    "HandoverResult",
    "InvalidSharingError",
    "RanError",
    "Ue",
    "UeMetrics",
    "UnknownEntityError",
    "World",
    "compute_sinr",
    "compute_throughput",
    "path_loss_db",
    "received_power_dbm",
]
