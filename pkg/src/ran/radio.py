"""
Radio model for the simulated RAN.

Macro-cell path loss PL(d) = 128.1 + 37.6 * log10(d_km), a fixed noise floor and
interference summed in the linear power domain over every other online cell.
Throughput is a Shannon share of the serving cell bandwidth.
"""

import math
from typing import Iterable, Sequence, Tuple

import config
from ran.errors import CellOfflineError, DegenerateGeometryError, InvalidSharingError

Position = Tuple[float, float]


def distance_m(a: Position, b: Position) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])


def path_loss_db(distance: float) -> float:
    """Path loss in dB for a distance in metres."""
    if distance <= 0:
        raise DegenerateGeometryError(f"distance must be > 0, got {distance}")
    return config.PATH_LOSS_CONST_DB + config.PATH_LOSS_SLOPE_DB * math.log10(distance / 1000.0)


def received_power_dbm(cell, position: Position) -> float:
    """RSRP of `cell` at `position` (tx power minus path loss)."""
    return cell.tx_power - path_loss_db(distance_m(cell.position, position))


def dbm_to_mw(value_dbm: float) -> float:
    return 10.0 ** (value_dbm / 10.0)


def sinr_from_powers(signal_dbm: float, interferers_dbm: Iterable[float],
                     noise_dbm: float = None) -> float:
    """SINR in dB from a signal power and interferer powers, all in dBm."""
    noise = dbm_to_mw(config.NOISE_FLOOR_DBM if noise_dbm is None else noise_dbm)
    interference = sum(dbm_to_mw(p) for p in interferers_dbm)
    return signal_dbm - 10.0 * math.log10(noise + interference)


def compute_sinr(ue, cell, cells: Sequence) -> float:
    """
    SINR of `ue` on `cell` with every other online cell in `cells` interfering.

    Raises:
        DegenerateGeometryError: UE sits on a cell site
        CellOfflineError: `cell` is offline
    """
    if not cell.online:
        raise CellOfflineError(f"cell {cell.cell_id} is offline")
    signal = received_power_dbm(cell, ue.position)
    interferers = [
        received_power_dbm(other, ue.position)
        for other in cells
        if other.online and other.cell_id != cell.cell_id
    ]
    return sinr_from_powers(signal, interferers)


def compute_throughput(sinr: float, cell, sharing_ues: int,
                       cap: float = None) -> float:
    """
    Downlink throughput (Mbps) of one UE sharing `cell` with `sharing_ues` - 1 others.

    T = (bandwidth / sharing_ues) * log2(1 + 10^(sinr/10)), clamped to [0, cap].
    """
    if sharing_ues < 1:
        raise InvalidSharingError(f"sharing_ues must be >= 1, got {sharing_ues}")
    cap = config.PER_UE_CAP_MBPS if cap is None else cap
    shannon = (cell.bandwidth / sharing_ues) * math.log2(1.0 + 10.0 ** (sinr / 10.0))
    return min(max(shannon, 0.0), max(cap, 0.0))
