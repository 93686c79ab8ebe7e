"""
Simulated RAN world: cells (E2 nodes), mobile UEs and the per-tick measurement stream.
"""

import hashlib
import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

import config
from ran.errors import CellOfflineError, DegenerateGeometryError, RanError, UnknownEntityError
from ran.radio import Position, compute_sinr, compute_throughput, received_power_dbm

logger = logging.getLogger(__name__)

Area = Tuple[float, float, float, float]  # xmin, ymin, xmax, ymax


@dataclass
class Cell:
    cell_id: str
    position: Position
    tx_power: float = 46.0
    bandwidth: float = 10.0
    max_ues: int = 20
    online: bool = True

    def __post_init__(self):
        if not math.isfinite(self.tx_power):
            raise ValueError(f"{self.cell_id}: tx_power must be finite")
        if self.bandwidth <= 0:
            raise ValueError(f"{self.cell_id}: bandwidth must be > 0")
        if self.max_ues < 1:
            raise ValueError(f"{self.cell_id}: max_ues must be >= 1")


@dataclass
class Ue:
    ue_id: str
    position: Position
    serving_cell: str
    traffic_demand: float = 50.0
    velocity: Position = (0.0, 0.0)
    speed: float = 0.0  # m/tick
    area: Optional[Area] = None
    waypoint: Optional[Position] = None

    def __post_init__(self):
        if self.traffic_demand < 0:
            raise ValueError(f"{self.ue_id}: traffic_demand must be >= 0")


@dataclass(frozen=True)
class UeMetrics:
    ue_id: str
    tick: int
    serving_cell: str
    sinr_serving: float
    rsrp_serving: float
    prb_usage: float
    throughput_dl: float
    neighbours: Tuple[Tuple[str, float], ...] = ()

    def __post_init__(self):
        if self.throughput_dl < 0:
            raise ValueError(f"{self.ue_id}@{self.tick}: negative throughput")
        if not 0.0 <= self.prb_usage <= 100.0:
            raise ValueError(f"{self.ue_id}@{self.tick}: prb_usage out of [0,100]")
        ids = [cell_id for cell_id, _ in self.neighbours]
        if self.serving_cell in ids:
            raise ValueError(f"{self.ue_id}@{self.tick}: serving cell listed as neighbour")
        ordered = sorted(self.neighbours, key=lambda n: (-n[1], n[0]))
        if list(self.neighbours) != ordered:
            raise ValueError(f"{self.ue_id}@{self.tick}: neighbours not sorted by rsrp")

    def to_dict(self) -> Dict:
        return {
            "ue_id": self.ue_id,
            "tick": self.tick,
            "serving_cell": self.serving_cell,
            "sinr_serving": self.sinr_serving,
            "rsrp_serving": self.rsrp_serving,
            "prb_usage": self.prb_usage,
            "throughput_dl": self.throughput_dl,
            "neighbours": [[cell_id, rsrp] for cell_id, rsrp in self.neighbours],
        }

    @classmethod
    def from_dict(cls, data: Dict) -> "UeMetrics":
        return cls(
            ue_id=data["ue_id"],
            tick=int(data["tick"]),
            serving_cell=data["serving_cell"],
            sinr_serving=float(data["sinr_serving"]),
            rsrp_serving=float(data["rsrp_serving"]),
            prb_usage=float(data["prb_usage"]),
            throughput_dl=float(data["throughput_dl"]),
            neighbours=tuple((str(c), float(r)) for c, r in data.get("neighbours", [])),
        )


@dataclass(frozen=True)
class CellMetrics:
    cell_id: str
    tick: int
    connected_ue_count: int
    load: float
    aggregate_throughput: float
    online: bool = True

    def __post_init__(self):
        if self.connected_ue_count < 0:
            raise ValueError(f"{self.cell_id}@{self.tick}: negative UE count")
        if not 0.0 <= self.load <= 100.0:
            raise ValueError(f"{self.cell_id}@{self.tick}: load out of [0,100]")

    def to_dict(self) -> Dict:
        return {
            "cell_id": self.cell_id,
            "tick": self.tick,
            "connected_ue_count": self.connected_ue_count,
            "load": self.load,
            "aggregate_throughput": self.aggregate_throughput,
            "online": self.online,
        }

    @classmethod
    def from_dict(cls, data: Dict) -> "CellMetrics":
        return cls(
            cell_id=data["cell_id"],
            tick=int(data["tick"]),
            connected_ue_count=int(data["connected_ue_count"]),
            load=float(data["load"]),
            aggregate_throughput=float(data["aggregate_throughput"]),
            online=bool(data.get("online", True)),
        )


@dataclass(frozen=True)
class HandoverResult:
    ue_id: str
    source_cell: str
    target_cell: str
    tick: int
    status: str  # applied | noop | rejected-capacity

    @property
    def applied(self) -> bool:
        return self.status == "applied"


@dataclass
class StepEmission:
    tick: int
    ue_metrics: List[UeMetrics] = field(default_factory=list)
    cell_metrics: List[CellMetrics] = field(default_factory=list)


class World:
    """
    Cells and UEs advanced one tick at a time.

    All randomness comes from the generator handed in, so identical
    (world, seed) pairs emit identical metric streams.
    """

    def __init__(self, cells: Sequence[Cell], ues: Sequence[Ue],
                 rng: Optional[np.random.Generator] = None,
                 per_ue_cap: float = None):
        self.cells: Dict[str, Cell] = {c.cell_id: c for c in cells}
        self.ues: Dict[str, Ue] = {u.ue_id: u for u in ues}
        self.rng = rng if rng is not None else np.random.default_rng(0)
        self.per_ue_cap = config.PER_UE_CAP_MBPS if per_ue_cap is None else per_ue_cap
        self.tick = -1
        self.last_throughput: Dict[str, float] = {}
        self._validate()

    def _validate(self):
        if len(self.cells) == 0:
            raise ValueError("world needs at least one cell")
        counts = self.connected_counts()
        for ue in self.ues.values():
            if ue.serving_cell not in self.cells:
                raise UnknownEntityError(f"{ue.ue_id}: unknown serving cell {ue.serving_cell}")
        for cell_id, count in counts.items():
            if count > self.cells[cell_id].max_ues:
                raise ValueError(f"{cell_id}: {count} UEs exceed max_ues")

    # ------------------------------------------------------------------
    # Queries
    # ------------------------------------------------------------------

    def cell(self, cell_id: str) -> Cell:
        try:
            return self.cells[cell_id]
        except KeyError:
            raise UnknownEntityError(f"unknown cell {cell_id}") from None

    def ue(self, ue_id: str) -> Ue:
        try:
            return self.ues[ue_id]
        except KeyError:
            raise UnknownEntityError(f"unknown UE {ue_id}") from None

    def connected_counts(self) -> Counter:
        counts = Counter({cell_id: 0 for cell_id in self.cells})
        for ue in self.ues.values():
            counts[ue.serving_cell] += 1
        return counts

    def ues_on(self, cell_id: str) -> List[str]:
        return sorted(u.ue_id for u in self.ues.values() if u.serving_cell == cell_id)

    def state_digest(self) -> str:
        """Stable digest of the mutable world state (used for bit-identity checks)."""
        h = hashlib.sha256()
        h.update(repr(self.tick).encode())
        for cell_id in sorted(self.cells):
            c = self.cells[cell_id]
            h.update(repr((c.cell_id, c.position, c.tx_power, c.bandwidth, c.max_ues, c.online)).encode())
        for ue_id in sorted(self.ues):
            u = self.ues[ue_id]
            h.update(repr((u.ue_id, u.position, u.serving_cell, u.traffic_demand,
                           u.velocity, u.waypoint)).encode())
        return h.hexdigest()

    # ------------------------------------------------------------------
    # Dynamics
    # ------------------------------------------------------------------

    def _move(self, ue: Ue):
        if ue.speed <= 0 or ue.area is None:
            ue.velocity = (0.0, 0.0)
            return
        if ue.waypoint is None:
            ue.waypoint = self._draw_waypoint(ue.area)
        dx = ue.waypoint[0] - ue.position[0]
        dy = ue.waypoint[1] - ue.position[1]
        remaining = math.hypot(dx, dy)
        if remaining <= ue.speed:
            ue.velocity = (dx, dy)
            ue.position = ue.waypoint
            ue.waypoint = self._draw_waypoint(ue.area)
        else:
            scale = ue.speed / remaining
            ue.velocity = (dx * scale, dy * scale)
            ue.position = (ue.position[0] + ue.velocity[0], ue.position[1] + ue.velocity[1])

    def _draw_waypoint(self, area: Area) -> Position:
        xmin, ymin, xmax, ymax = area
        return (float(self.rng.uniform(xmin, xmax)), float(self.rng.uniform(ymin, ymax)))

    def _online_cells(self) -> List[Cell]:
        return [self.cells[c] for c in sorted(self.cells) if self.cells[c].online]

    def step(self) -> StepEmission:
        """Advance one tick and emit metrics for every measurable UE and every cell; offline cells get a zeroed row."""
        self.tick += 1
        for ue_id in sorted(self.ues):
            self._move(self.ues[ue_id])

        online = self._online_cells()
        counts = self.connected_counts()
        emission = StepEmission(tick=self.tick)
        aggregate: Dict[str, float] = {c.cell_id: 0.0 for c in online}
        self.last_throughput = {}

        for ue_id in sorted(self.ues):
            ue = self.ues[ue_id]
            serving = self.cells[ue.serving_cell]
            if not serving.online:
                # Outage: attached to a node that no longer reports
                self.last_throughput[ue_id] = 0.0
                continue
            metrics = self._measure(ue, serving, online, counts[serving.cell_id])
            aggregate[serving.cell_id] += metrics.throughput_dl
            self.last_throughput[ue_id] = metrics.throughput_dl
            emission.ue_metrics.append(metrics)

        for cell_id in sorted(self.cells):
            cell = self.cells[cell_id]
            if not cell.online:
                emission.cell_metrics.append(CellMetrics(cell_id, self.tick, 0, 0.0, 0.0, online=False))
                continue
            n = counts[cell_id]
            emission.cell_metrics.append(CellMetrics(
                cell_id=cell_id,
                tick=self.tick,
                connected_ue_count=n,
                load=100.0 * n / cell.max_ues,
                aggregate_throughput=aggregate[cell_id],
            ))
        return emission

    def _measure(self, ue: Ue, serving: Cell, online: List[Cell], sharing: int) -> UeMetrics:
        try:
            sinr = compute_sinr(ue, serving, online)
        except DegenerateGeometryError:
            ue.position = (ue.position[0] + 1e-3, ue.position[1])
            sinr = compute_sinr(ue, serving, online)
        rsrp = {c.cell_id: received_power_dbm(c, ue.position) for c in online}
        neighbours = sorted(
            ((cell_id, p) for cell_id, p in rsrp.items() if cell_id != serving.cell_id),
            key=lambda n: (-n[1], n[0]),
        )[:config.NEIGHBOUR_SLOTS]
        cap = min(self.per_ue_cap, ue.traffic_demand)
        return UeMetrics(
            ue_id=ue.ue_id,
            tick=self.tick,
            serving_cell=serving.cell_id,
            sinr_serving=sinr,
            rsrp_serving=rsrp[serving.cell_id],
            prb_usage=100.0 / sharing,
            throughput_dl=compute_throughput(sinr, serving, sharing, cap=cap),
            neighbours=tuple(neighbours),
        )

    # ------------------------------------------------------------------
    # Control
    # ------------------------------------------------------------------

    def execute_handover(self, ue_id: str, target_cell: str) -> HandoverResult:
        """
        Move `ue_id` to `target_cell`.

        Returns a HandoverResult; a rejected or no-op handover leaves the world untouched.

        Raises:
            UnknownEntityError: unknown UE or cell
            CellOfflineError: target cell offline
        """
        ue = self.ue(ue_id)
        target = self.cell(target_cell)
        source = ue.serving_cell
        if target_cell == source:
            return HandoverResult(ue_id, source, target_cell, self.tick, "noop")
        if not target.online:
            raise CellOfflineError(f"target cell {target_cell} is offline")
        if self.connected_counts()[target_cell] >= target.max_ues:
            return HandoverResult(ue_id, source, target_cell, self.tick, "rejected-capacity")
        ue.serving_cell = target_cell
        logger.debug("tick %d: handover %s %s -> %s", self.tick, ue_id, source, target_cell)
        return HandoverResult(ue_id, source, target_cell, self.tick, "applied")

    def set_online(self, cell_id: str, online: bool) -> None:
        self.cell(cell_id).online = online


def strongest_cell(position: Position, cells: Sequence[Cell],
                   counts: Optional[Counter] = None) -> str:
    """Strongest-RSRP online cell at `position` that still has capacity."""
    counts = counts or Counter()
    ranked = sorted(
        (c for c in cells if c.online),
        key=lambda c: (-received_power_dbm(c, position), c.cell_id),
    )
    for cell in ranked:
        if counts[cell.cell_id] < cell.max_ues:
            return cell.cell_id
    raise RanError("no online cell with free capacity")
