"""
One seeded end-to-end run: RAN world + RIC platform + apps + attackers + defence monitor.
"""

import logging
import time
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional

import numpy as np

import config
from agents.anomaly import AnomalyDetector
from agents.base import XApp
from agents.errors import ModelError
from agents.kpimon import KpiMonitor
from agents.observer import Observer
from agents.qoe import QoePredictor
from agents.rapp import A1Policy, PolicyRApp
from agents.rc import RanControl
from agents.ts import TrafficSteering
from attacks.base import Attacker
from attacks.errors import AttackError
from attacks.registry import build_attacker
from defences.monitor import DefenceMonitor
from harness.scenario import Scenario
from ran.errors import RanError
from ran.world import Cell, Ue, World, strongest_cell
from ric.errors import RicError
from ric.platform import RicPlatform
from ric.types import MsgType

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TickTruth:
    """What really happened in the RAN at one tick (never shown to apps)."""

    tick: int
    throughput: Dict[str, float]
    serving: Dict[str, str]
    online: Dict[str, bool]


@dataclass
class SimulationResult:
    scenario: Scenario
    seed: int
    world: World
    platform: RicPlatform
    apps: Dict[str, XApp]
    observers: List[Observer]
    attackers: List[Attacker]
    monitor: Optional[DefenceMonitor]
    truth: List[TickTruth] = field(default_factory=list)
    tick_seconds: List[float] = field(default_factory=list)

    @property
    def defence_seconds(self) -> float:
        return self.platform.defence_seconds + (self.monitor.seconds if self.monitor else 0.0)

    @property
    def attacker_ids(self) -> List[str]:
        return [a.xapp_id for a in self.attackers]


def build_world(scenario: Scenario, rng: np.random.Generator) -> World:
    """Cells from the topology; UEs placed uniformly in their group area."""
    cells = [Cell(c.cell_id, tuple(c.position), c.tx_power, c.bandwidth, c.max_ues, c.online)
             for c in scenario.cells]
    counts: Counter = Counter()
    ues = []
    for group in scenario.ues:
        x0, y0, x1, y1 = group.area
        for ue_id in group.ue_ids():
            position = (float(rng.uniform(x0, x1)), float(rng.uniform(y0, y1)))
            serving = group.initial_cell or strongest_cell(position, cells, counts)
            counts[serving] += 1
            ues.append(Ue(ue_id, position, serving, group.traffic_demand,
                          speed=group.speed, area=tuple(group.area)))
    return World(cells, ues, rng=rng, per_ue_cap=scenario.apps.per_ue_cap)


class Simulation:
    """
    Wires one scenario into a runnable tick loop.

    Seed streams are spawned from the run seed in a fixed order (mobility,
    token nonces, then one per attacker), so adding an attacker never
    changes the world or the benign apps' tokens.

    Args:
        scenario: validated scenario
        seed: run seed (defaults to the scenario's)
    """

    def __init__(self, scenario: Scenario, seed: Optional[int] = None):
        self.scenario = scenario
        self.seed = scenario.seed if seed is None else seed
        streams = np.random.SeedSequence(self.seed).spawn(2 + len(scenario.attacks))
        mobility, tokens, attack_streams = streams[0], streams[1], streams[2:]

        self.world = build_world(scenario, np.random.default_rng(mobility))
        self.platform = RicPlatform(
            self.world,
            scenario.platform.settings(),
            scenario.defences.settings(),
            seed=self.seed,
            token_rng=np.random.default_rng(tokens),
        )
        apps = scenario.apps
        self.apps: Dict[str, XApp] = {
            "kpimon": KpiMonitor(self.platform, self.world.cells, lease_ticks=scenario.platform.lease_ticks),
            "qoe": QoePredictor(self.platform, lam=apps.lam, retrain_period=apps.retrain_period,
                                train_window=apps.train_window, retention=apps.retention,
                                training_ue_ids=apps.training_ue_ids),
            "ad": AnomalyDetector(self.platform, window=apps.anomaly_window, threshold=apps.anomaly_threshold),
            "rapp": PolicyRApp(self.platform, period=apps.rapp_period, sla_mbps=apps.sla_mbps,
                               load_threshold=apps.load_threshold,
                               static_policies=[A1Policy.from_dict(p.model_dump()) for p in apps.static_policies]),
        }
        if apps.ts_enabled:
            self.apps["ts"] = TrafficSteering(self.platform, margin=apps.margin, priority=apps.ts_priority,
                                              max_handovers=apps.ts_max_handovers)
            self.apps["rc"] = RanControl(self.platform)
        self.observers = [Observer(self.platform, o.xapp_id, o.namespaces, o.period, o.offset, o.zone)
                          for o in scenario.observers]
        self.attackers = [build_attacker(self.platform, cfg, np.random.default_rng(stream))
                          for cfg, stream in zip(scenario.attack_configs(), attack_streams)]
        self.monitor = DefenceMonitor(self.platform) if scenario.defences.detection else None
        self._install_routes()

    def _install_routes(self) -> None:
        routes = {
            MsgType.QOE_PREDICTION.value: "ts",
            MsgType.ANOMALY_ALERT.value: "ts",
            MsgType.A1_POLICY.value: "ts",
            MsgType.TS_CONTROL.value: "rc",
        }
        routes = {m: endpoint for m, endpoint in routes.items() if self.platform.registered(endpoint)}
        if routes:
            self.platform.rmr_update_routes(config.ADMIN_ID, routes, self.platform.admin_token)

    def _call(self, app: XApp, hook: Callable[[int], None], tick: int) -> None:
        try:
            hook(tick)
        except (RicError, ModelError, AttackError, RanError) as e:
            logger.warning("tick %d: %s failed: %s", tick, app.xapp_id, e)
            app.stats["failed"] += 1

    def step(self, tick: int) -> None:
        platform = self.platform
        platform.begin_tick(tick)
        for attacker in self.attackers:
            self._call(attacker, attacker.act, tick)
        emission = self.world.step()
        platform.deliver_e2_reports(emission)

        self._call(self.apps["kpimon"], self.apps["kpimon"].tick, tick)
        for attacker in self.attackers:
            self._call(attacker, attacker.after_collection, tick)
        for name in ("qoe", "ad", "rapp"):
            self._call(self.apps[name], self.apps[name].tick, tick)
        for observer in self.observers:
            self._call(observer, observer.tick, tick)
        for attacker in self.attackers:
            self._call(attacker, attacker.relay, tick)
        for name in ("ts", "rc"):
            if name in self.apps:
                self._call(self.apps[name], self.apps[name].tick, tick)

        platform.resolve_controls()
        if self.monitor is not None:
            self.monitor.evaluate(tick)

    def run(self) -> SimulationResult:
        result = SimulationResult(
            scenario=self.scenario,
            seed=self.seed,
            world=self.world,
            platform=self.platform,
            apps=self.apps,
            observers=self.observers,
            attackers=self.attackers,
            monitor=self.monitor,
        )
        logger.info("running %s (seed %d, %d ticks)", self.scenario.name, self.seed, self.scenario.ticks)
        for tick in range(self.scenario.ticks):
            started = time.perf_counter()
            self.step(tick)
            result.tick_seconds.append(time.perf_counter() - started)
            result.truth.append(TickTruth(
                tick=tick,
                throughput=dict(self.world.last_throughput),
                serving={u: ue.serving_cell for u, ue in sorted(self.world.ues.items())},
                online={c: cell.online for c, cell in sorted(self.world.cells.items())},
            ))
        for attacker in self.attackers:
            self._call(attacker, attacker.finish, self.scenario.ticks - 1)
        logger.info("%s finished: %d handovers, %d alerts", self.scenario.name,
                    sum(h.applied for h in self.platform.handovers), len(self.platform.alerts))
        return result


def run_simulation(scenario: Scenario, seed: Optional[int] = None) -> SimulationResult:
    return Simulation(scenario, seed).run()
