"""
Adversarial-ML attacks on the QoE model through SDL access: membership
inference (residual search and perturbation), model extraction (scraping and
probe injection) and training-data poisoning.
"""

import itertools
import logging
from typing import Dict, List, Mapping, Optional, Sequence, Set, Tuple

import numpy as np

import config
from agents.base import CELL_METRIC, MODEL_STORE, QOE_PREDICTION, TRAIN_SET, UE_METRIC, tick_key, tick_prefix
from agents.errors import SingularSystemError
from agents.model import FEATURES, N_FEATURES, FeatureVector, LinearModel, featurize, lstsq_fit, ridge_fit
from attacks.base import Attacker
from attacks.errors import InsufficientDataError
from attacks.types import AttackConfig, AttackKind
from ric.errors import AccessDeniedError
from ric.types import MsgType, XAppDescriptor

logger = logging.getLogger(__name__)


def _reader_manifest(cfg: AttackConfig) -> XAppDescriptor:
    # a plausible analytics app: reads the KPI namespaces and nothing else
    return XAppDescriptor(
        xapp_id=cfg.attacker_id,
        namespaces=((UE_METRIC, "read"), (CELL_METRIC, "read")),
        zone="analytics",
    )


# ----------------------------------------------------------------------
# Pure helpers
# ----------------------------------------------------------------------

def membership_score(fingerprint: Sequence[float], rows: Sequence[Sequence[float]]) -> float:
    """1.0 on an exact feature match, else 1 / (1 + distance to the nearest row); 0.0 with no rows."""
    if not rows:
        return 0.0
    target = tuple(float(v) for v in fingerprint)
    if any(tuple(float(v) for v in row) == target for row in rows):
        return 1.0
    distances = np.linalg.norm(np.asarray(rows, dtype=float) - np.asarray(target), axis=1)
    return float(1.0 / (1.0 + distances.min()))


def fit_surrogate(pairs: Sequence[Tuple[Sequence[float], float]], lam: float = 0.0,
                  version: int = 0) -> LinearModel:
    """
    Fit a surrogate of the victim from (features, prediction) pairs.

    Raises:
        InsufficientDataError: fewer than two pairs
    """
    if len(pairs) < 2:
        raise InsufficientDataError(f"need at least 2 scraped pairs, got {len(pairs)}")
    X = np.array([features for features, _ in pairs], dtype=float)
    y = np.array([value for _, value in pairs], dtype=float)
    weights, bias = lstsq_fit(X, y) if lam == 0 else ridge_fit(X, y, lam)
    return LinearModel(
        weights=tuple(float(w) for w in weights),
        bias=float(bias),
        lam=lam,
        training_row_count=len(pairs),
        model_version=version,
    )


def perturbation_shift(features: Sequence[Sequence[float]], labels: Sequence[float],
                       perturbed: Sequence[bool], delta: float, lam: float, x: Sequence[float]) -> float:
    """
    Prediction at `x` of a ridge fit on (features, labels) minus that of the
    same fit with `delta` taken off the perturbed labels. Exactly 0.0 when
    `delta` is zero or no row is perturbed.

    Raises:
        SingularSystemError: see ridge_fit
    """
    mask = np.asarray(perturbed, dtype=bool)
    if delta == 0 or not mask.any():
        return 0.0
    X = np.asarray(features, dtype=float)
    y = np.asarray(labels, dtype=float)
    w_poisoned, b_poisoned = ridge_fit(X, y, lam)
    w_clean, b_clean = ridge_fit(X, y - delta * mask, lam)
    return float(np.dot(w_poisoned - w_clean, x) + (b_poisoned - b_clean))


def evaluation_grid(ranges: Sequence[Tuple[float, float]], points: int = 3) -> np.ndarray:
    """Cartesian grid with `points` evenly spaced values per feature range."""
    axes = [np.linspace(lo, hi, points) for lo, hi in ranges]
    return np.array(list(itertools.product(*axes)), dtype=float)


def fidelity(surrogate: LinearModel, victim: LinearModel,
             tolerance: float = config.MEA_FIDELITY_TOLERANCE, points: int = 3) -> float:
    """Fraction of the victim's training-range grid where the clamped predictions agree within `tolerance`."""
    if not victim.feature_ranges:
        raise InsufficientDataError("victim model has no recorded feature ranges")
    grid = evaluation_grid(victim.feature_ranges, points)
    theirs = np.maximum(0.0, grid @ np.asarray(victim.weights) + victim.bias)
    ours = np.maximum(0.0, grid @ np.asarray(surrogate.weights) + surrogate.bias)
    return float(np.mean(np.abs(theirs - ours) < tolerance))


def finite_difference(base: float, plus: Optional[float], minus: Optional[float],
                      offset: float = 1.0) -> Optional[float]:
    """
    Weight estimate along one axis from clamped predictions.

    A prediction of 0 may be clamped, so it is only used when the other side
    of the difference is positive as well.
    """
    if plus is not None and minus is not None and plus > 0 and minus > 0:
        return (plus - minus) / (2 * offset)
    if plus is not None and plus > 0 and base > 0:
        return (plus - base) / offset
    if minus is not None and minus > 0 and base > 0:
        return (base - minus) / offset
    return None


def poison_rows(rows: Sequence[Mapping], strategy: str, fraction: float, delta: float,
                rng: np.random.Generator, count: int = 1) -> List[Tuple[Optional[int], Dict]]:
    """
    Poisoned training rows.

    label-shift: each row is selected with probability `fraction` and
    returned as (index, row with label + delta). row-injection: `count`
    draws, each kept with probability `fraction`, copy a random row with
    label + delta and are returned as (None, row).
    """
    if strategy not in ("label-shift", "row-injection"):
        raise ValueError(f"unknown poisoning strategy {strategy!r}")
    if not rows or fraction <= 0:
        return []
    poisoned = []
    if strategy == "label-shift":
        for index, row in enumerate(rows):
            if rng.random() < fraction:
                poisoned.append((index, {**row, "label": float(row["label"]) + delta}))
    else:
        for _ in range(count):
            if rng.random() < fraction:
                source = rows[int(rng.integers(len(rows)))]
                poisoned.append((None, {**source, "label": float(source["label"]) + delta}))
    return poisoned


# ----------------------------------------------------------------------
# Attackers
# ----------------------------------------------------------------------

class MiaLeakAttack(Attacker):
    """
    Residual search for membership: fingerprints each candidate UE from the
    KPIs it is allowed to read at `knowledge_tick`, then scans TrainSet for
    rows matching that fingerprint.
    """

    kind = AttackKind.MIA_LEAK

    @classmethod
    def default_manifest(cls, cfg: AttackConfig) -> XAppDescriptor:
        return _reader_manifest(cfg)

    def __init__(self, platform, config: AttackConfig, rng=None):
        super().__init__(platform, config, rng)
        params = self.params
        explicit = params.get("candidates") or ([config.target] if config.target else None)
        self.candidates = sorted(explicit) if explicit else None  # None: every UE seen in UE-Metric
        self.knowledge_tick = int(params.get("knowledge_tick", max(0, config.start - 1)))
        self.done = False

    def fingerprints(self) -> Dict[str, FeatureVector]:
        k = self.knowledge_tick
        cells = {r.value["cell_id"]: r.value
                 for r in self.platform.sdl_scan(self.xapp_id, CELL_METRIC, tick_prefix(k))}
        if self.candidates is None:
            return {r.value["ue_id"]: featurize(r.value, cells)
                    for r in self.platform.sdl_scan(self.xapp_id, UE_METRIC, tick_prefix(k))}
        known = {}
        for ue_id in self.candidates:
            record = self.platform.sdl_read(self.xapp_id, UE_METRIC, tick_key(k, ue_id))
            if record is not None:
                known[ue_id] = featurize(record.value, cells)
        return known

    def act(self, tick: int) -> None:
        if self.done or not self.active(tick) or tick <= self.knowledge_tick:
            return
        self.done = True
        try:
            known = self.fingerprints()
            rows = [r.value["features"] for r in self.platform.sdl_scan(self.xapp_id, TRAIN_SET)]
        except AccessDeniedError as e:
            self.block(e.reason, tick)
            return
        scores = {ue_id: membership_score(fv.values, rows) for ue_id, fv in sorted(known.items())}
        self.observations = {"tick": tick, "rows_scanned": len(rows), "scores": scores}
        logger.info("tick %d: %s scored %d candidates against %d residual rows",
                    tick, self.xapp_id, len(scores), len(rows))


class MiaPoisonAttack(Attacker):
    """
    Membership by perturbation: fingerprints a probe, inflates the target's
    reported throughput by `intensity` Mbps during the window, then waits for
    the first model trained after the window started. The shift is measured by
    refitting that model's TrainSet window twice, as trained and with the
    inflation taken back off the target's rows, and evaluating both at the
    probe. A non-member never reaches TrainSet, so its shift is 0.
    """

    kind = AttackKind.MIA_POISON

    @classmethod
    def default_manifest(cls, cfg: AttackConfig) -> XAppDescriptor:
        return _reader_manifest(cfg)

    def __init__(self, platform, config: AttackConfig, rng=None):
        super().__init__(platform, config, rng)
        self.probe_ue = self.params.get("probe_ue", config.target)
        self.delta = float(config.intensity)
        self.probe: Optional[Tuple[float, ...]] = None
        self.before: Optional[LinearModel] = None
        self.perturbed_ticks: Set[int] = set()
        self.done = False

    def _latest_model(self) -> Optional[Tuple[LinearModel, int]]:
        records = self.platform.sdl_scan(self.xapp_id, MODEL_STORE, last=1)
        if not records:
            return None
        return LinearModel.from_dict(records[0].value), int(records[0].value["trained_tick"])

    def act(self, tick: int) -> None:
        if self.done or self.blocked_reason or self.platform.is_quarantined(self.xapp_id):
            return
        try:
            if tick == self.config.start:
                self._record_probe(tick)
            elif tick >= self.config.stop and self.probe is not None:
                self._measure(tick)
        except AccessDeniedError as e:
            self.block(e.reason, tick)

    def _record_probe(self, tick: int) -> None:
        t = max(0, tick - 1)
        record = self.platform.sdl_read(self.xapp_id, UE_METRIC, tick_key(t, self.probe_ue))
        cells = {r.value["cell_id"]: r.value
                 for r in self.platform.sdl_scan(self.xapp_id, CELL_METRIC, tick_prefix(t))}
        if record is None:
            logger.info("tick %d: %s has no metrics for probe %s", tick, self.xapp_id, self.probe_ue)
            self.done = True
            return
        self.probe = featurize(record.value, cells).values
        latest = self._latest_model()
        self.before = latest[0] if latest else None
        self.observations = {
            "probe": list(self.probe),
            "before_version": self.before.model_version if self.before else 0,
            "pred_before": self.before.raw(self.probe) if self.before else 0.0,
        }

    def _window_rows(self, model: LinearModel, trained_tick: int) -> List[Mapping]:
        rows = [r.value for r in self.platform.sdl_scan(self.xapp_id, TRAIN_SET)
                if int(r.value["tick"]) <= trained_tick]
        return rows[-model.training_row_count:] if model.training_row_count else []

    def _measure(self, tick: int) -> None:
        latest = self._latest_model()
        if latest is None:
            return
        model, trained_tick = latest
        if model.model_version <= self.observations["before_version"] or trained_tick < self.config.start:
            return
        rows = self._window_rows(model, trained_tick)
        perturbed = [row["ue_id"] == self.config.target and int(row["tick"]) in self.perturbed_ticks
                     for row in rows]
        try:
            shift = perturbation_shift([row["features"] for row in rows], [row["label"] for row in rows],
                                       perturbed, self.delta, model.lam, self.probe)
        except SingularSystemError as e:
            logger.warning("tick %d: %s cannot refit the window, %s", tick, self.xapp_id, e)
            self.done = True
            return
        self.observations.update(
            after_version=model.model_version,
            pred_after=model.raw(self.probe),
            window_rows=len(rows),
            perturbed_rows=sum(perturbed),
            shift=shift,
            measured_tick=tick,
        )
        logger.info("tick %d: %s measured shift %.4f over %d rows (%d perturbed)",
                    tick, self.xapp_id, shift, len(rows), sum(perturbed))
        self.done = True

    def after_collection(self, tick: int) -> None:
        if not self.active(tick) or self.delta == 0:
            return
        key = tick_key(tick, self.config.target)
        try:
            record = self.platform.sdl_read(self.xapp_id, UE_METRIC, key)
            if record is None:
                return
            value = {**record.value, "throughput_dl": float(record.value["throughput_dl"]) + self.delta}
            self.platform.sdl_write(self.xapp_id, UE_METRIC, key, value)
            self.perturbed_ticks.add(tick)
            self.stats["perturbed"] += 1
        except AccessDeniedError as e:
            self.block(e.reason, tick)


class MeaScrapeAttack(Attacker):
    """
    Model extraction by scraping: collects (candidate features, prediction)
    pairs of the newest model version from the QoE-Prediction namespace and
    from any QOE_PREDICTION message that lands in its own inbox, up to
    `intensity` pairs, and fits a surrogate when the run ends.
    """

    kind = AttackKind.MEA_SCRAPE

    @classmethod
    def default_manifest(cls, cfg: AttackConfig) -> XAppDescriptor:
        return _reader_manifest(cfg)

    def __init__(self, platform, config: AttackConfig, rng=None):
        super().__init__(platform, config, rng)
        self.budget = int(config.intensity)
        self.lam = float(self.params.get("lam", 0.0))
        self.version = 0
        self.pairs: List[Tuple[List[float], float]] = []

    def collect(self, prediction: Mapping) -> None:
        version = int(prediction.get("model_version", 0))
        if version < self.version:
            return
        if version > self.version:
            self.version = version
            self.pairs = []
        features = prediction.get("features", {})
        for cell_id, value in sorted(prediction["per_cell"].items()):
            if len(self.pairs) >= self.budget:
                return
            if value > 0 and cell_id in features:
                self.pairs.append((list(features[cell_id]), float(value)))

    def act(self, tick: int) -> None:
        if not self.active(tick) or self.budget == 0 or tick == 0:
            return
        try:
            records = self.platform.sdl_scan(self.xapp_id, QOE_PREDICTION, tick_prefix(tick - 1))
        except AccessDeniedError as e:
            self.block(e.reason, tick)
            return
        for record in records:
            self.collect(record.value)
        for message in self.receive():
            if message.msg_type == MsgType.QOE_PREDICTION:
                self.collect(message.payload)

    def finish(self, tick: int) -> None:
        if self.blocked_reason or self.budget == 0:
            return
        self.observations = {"pairs": len(self.pairs), "version": self.version}
        try:
            surrogate = fit_surrogate(self.pairs, self.lam, self.version)
        except InsufficientDataError as e:
            logger.info("%s: no surrogate, %s", self.xapp_id, e)
            self.observations["error"] = "insufficient"
            return
        self.observations["surrogate"] = surrogate.to_dict()


class MeaPoisonAttack(Attacker):
    """
    Model extraction by probing: writes a baseline UE record plus one record
    per probed axis offset by +/- `offset`, each served by its own fake cell
    so the cell-level features can be offset as well, then finite-differences
    the predictions the QoE xApp publishes for them.
    """

    kind = AttackKind.MEA_POISON

    @classmethod
    def default_manifest(cls, cfg: AttackConfig) -> XAppDescriptor:
        return _reader_manifest(cfg)

    def __init__(self, platform, config: AttackConfig, rng=None):
        super().__init__(platform, config, rng)
        self.axes = min(N_FEATURES, int(config.intensity))
        self.offset = float(self.params.get("offset", 1.0))
        self.injected_at: Optional[int] = None
        self.probes: Dict[str, Tuple[str, str, Tuple[float, ...]]] = {}
        self.done = False

    def _template(self, tick: int) -> Optional[Tuple[Tuple[float, ...], float]]:
        t = tick - 1
        ues = {r.value["ue_id"]: r.value for r in self.platform.sdl_scan(self.xapp_id, UE_METRIC, tick_prefix(t))}
        if not ues:
            return None
        cells = {r.value["cell_id"]: r.value
                 for r in self.platform.sdl_scan(self.xapp_id, CELL_METRIC, tick_prefix(t))}
        ue = ues.get(self.config.target) or ues[sorted(ues)[0]]
        values = list(featurize(ue, cells).values)
        # keep neighbour slots >= 3 dB apart so unit offsets never reorder them
        for slot in (4, 5):
            values[slot] = min(values[slot], values[slot - 1] - 3.0)
        return tuple(values), float(ue["throughput_dl"])

    def _probe_set(self, base: Tuple[float, ...]) -> Dict[str, Tuple[float, ...]]:
        probes = {"base": base}
        for axis in range(self.axes):
            for sign, name in ((1.0, "plus"), (-1.0, "minus")):
                shifted = list(base)
                shifted[axis] += sign * self.offset
                probes[f"{name}-{axis}"] = tuple(shifted)
        return probes

    def _write_probe(self, tick: int, index: int, values: Tuple[float, ...], label: float) -> Tuple[str, str]:
        ue_id = f"{self.xapp_id}-ue-{index:02d}"
        cell_id = f"{self.xapp_id}-cell-{index:02d}"
        self.platform.sdl_write(self.xapp_id, CELL_METRIC, tick_key(tick, cell_id), {
            "cell_id": cell_id,
            "tick": tick,
            "connected_ue_count": 1,
            "load": values[7],
            "aggregate_throughput": values[6],
        })
        self.platform.sdl_write(self.xapp_id, UE_METRIC, tick_key(tick, ue_id), {
            "ue_id": ue_id,
            "tick": tick,
            "serving_cell": cell_id,
            "sinr_serving": values[0],
            "rsrp_serving": values[1],
            "prb_usage": values[2],
            "throughput_dl": label,
            "neighbours": [[f"{self.xapp_id}-nbr-{j}", values[3 + j]] for j in range(3)],
        })
        return ue_id, cell_id

    def act(self, tick: int) -> None:
        if self.done or not self.active(tick) or tick == 0:
            return
        if self.axes == 0:
            self.observations = {"weights": {}, "bias": None, "probes": 0}
            self.done = True
            return
        try:
            if self.injected_at is None:
                self._inject(tick)
            else:
                self._estimate(tick)
        except AccessDeniedError as e:
            self.block(e.reason, tick)

    def _inject(self, tick: int) -> None:
        template = self._template(tick)
        if template is None:
            return
        base, label = template
        self.probes = {}
        for index, (name, values) in enumerate(sorted(self._probe_set(base).items())):
            ue_id, cell_id = self._write_probe(tick, index, values, label)
            self.probes[name] = (ue_id, cell_id, values)
        self.injected_at = tick
        logger.info("tick %d: %s injected %d probe rows", tick, self.xapp_id, len(self.probes))

    def _estimate(self, tick: int) -> None:
        outputs: Dict[str, float] = {}
        versions = set()
        for name, (ue_id, cell_id, _) in self.probes.items():
            record = self.platform.sdl_read(self.xapp_id, QOE_PREDICTION, tick_key(self.injected_at, ue_id))
            if record is None:
                continue
            outputs[name] = float(record.value["per_cell"][cell_id])
            versions.add(int(record.value["model_version"]))
        if "base" not in outputs:
            # no model yet when the probes went in; try again
            self.injected_at = None
            return
        weights = {}
        for axis in range(self.axes):
            estimate = finite_difference(outputs["base"], outputs.get(f"plus-{axis}"),
                                         outputs.get(f"minus-{axis}"), self.offset)
            if estimate is not None:
                weights[FEATURES[axis]] = estimate
        bias = None
        if len(weights) == N_FEATURES and outputs["base"] > 0:
            base = self.probes["base"][2]
            bias = outputs["base"] - sum(weights[f] * x for f, x in zip(FEATURES, base))
        self.observations = {
            "weights": weights,
            "bias": bias,
            "probes": len(self.probes),
            "model_version": min(versions),
            "probe_tick": self.injected_at,
        }
        self.done = True


class DataPoisonAttack(Attacker):
    """
    Training-data poisoning: right after the QoE xApp stages a tick's rows,
    shifts the labels of a `intensity` fraction of them (label-shift) or
    injects shifted copies (row-injection).
    """

    kind = AttackKind.DATA_POISON

    @classmethod
    def default_manifest(cls, cfg: AttackConfig) -> XAppDescriptor:
        return _reader_manifest(cfg)

    def __init__(self, platform, config: AttackConfig, rng=None):
        super().__init__(platform, config, rng)
        params = self.params
        self.namespace = config.target or TRAIN_SET
        self.strategy = params.get("strategy", "label-shift")
        self.delta = float(params.get("delta", 50.0))
        self.count = int(params.get("count", 1))
        self.fraction = min(1.0, float(config.intensity))
        self.poisoned = 0

    def relay(self, tick: int) -> None:
        if not self.active(tick) or self.fraction == 0:
            return
        try:
            records = self.platform.sdl_scan(self.xapp_id, self.namespace, tick_prefix(tick))
            rows = [r.value for r in records]
            for n, (index, row) in enumerate(poison_rows(rows, self.strategy, self.fraction,
                                                         self.delta, self.rng, self.count)):
                key = records[index].key if index is not None else tick_key(tick, f"{self.xapp_id}-{n:03d}")
                self.platform.sdl_write(self.xapp_id, self.namespace, key, row)
                self.poisoned += 1
        except AccessDeniedError as e:
            self.block(e.reason, tick)
            return
        self.observations = {"poisoned_rows": self.poisoned, "strategy": self.strategy, "delta": self.delta}

