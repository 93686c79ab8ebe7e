import logging
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import config
from agents.base import (
    CELL_METRIC,
    MODEL_STORE,
    QOE_PREDICTION,
    TRAIN_SET,
    UE_METRIC,
    XApp,
    model_key,
    tick_key,
    tick_prefix,
)
from agents.errors import ModelError, NoDataError, SingularSystemError
from agents.model import FeatureVector, LinearModel, candidate_vectors, predict_cells, qoe_featurize, qoe_train
from ric.types import MsgType, XAppDescriptor

logger = logging.getLogger(__name__)


def qoe_descriptor(xapp_id: str = "qoe", zone: str = "analytics") -> XAppDescriptor:
    return XAppDescriptor(
        xapp_id=xapp_id,
        namespaces=(
            (UE_METRIC, "read"),
            (CELL_METRIC, "read"),
            (TRAIN_SET, "read"),
            (TRAIN_SET, "write"),
            (MODEL_STORE, "write"),
            (QOE_PREDICTION, "write"),
        ),
        sends=(MsgType.QOE_PREDICTION.value,),
        zone=zone,
    )


class QoePredictor(XApp):
    """
    QoE prediction xApp.

    Every tick: featurize each reporting UE against its serving cell and every
    reported neighbour, predict throughput per candidate cell, publish the
    prediction to the SDL and to the TS xApp. With retention on, training rows
    are staged in TrainSet. The model is refit every `retrain_period` ticks
    over the last `train_window` ticks.

    Args:
        platform: RicPlatform
        lam: ridge lambda
        retention: persist training rows in TrainSet
        training_ue_ids: UEs whose rows are used for training (None = all)
    """

    def __init__(self, platform, xapp_id: str = "qoe", lam: float = config.RIDGE_LAMBDA,
                 retrain_period: int = config.RETRAIN_PERIOD, train_window: int = config.TRAIN_WINDOW,
                 retention: bool = True, training_ue_ids: Optional[Iterable[str]] = None):
        super().__init__(platform, qoe_descriptor(xapp_id))
        self.lam = lam
        self.retrain_period = retrain_period
        self.train_window = train_window
        self.retention = retention
        self.training_ue_ids = frozenset(training_ue_ids) if training_ue_ids is not None else None
        self.model: Optional[LinearModel] = None
        self.version = 0
        self.history: List[LinearModel] = []

    def _trains_on(self, ue_id: str) -> bool:
        return self.training_ue_ids is None or ue_id in self.training_ue_ids

    def _snapshot(self, tick: int) -> Tuple[List[Mapping], Dict[str, Mapping]]:
        ues = [r.value for r in self.platform.sdl_scan(self.xapp_id, UE_METRIC, tick_prefix(tick))]
        cells = {r.value["cell_id"]: r.value
                 for r in self.platform.sdl_scan(self.xapp_id, CELL_METRIC, tick_prefix(tick))}
        return ues, cells

    def tick(self, tick: int) -> None:
        ues, cells = self._snapshot(tick)
        if self.retention:
            self.stage_training_rows(tick, ues, cells)
        if (tick + 1) % self.retrain_period == 0:
            self.retrain(tick)
        if self.model is not None:
            for ue in ues:
                self.publish_prediction(tick, ue, cells)

    def stage_training_rows(self, tick: int, ues: Sequence[Mapping], cells: Mapping[str, Mapping]) -> int:
        staged = 0
        for ue in ues:
            if not self._trains_on(ue["ue_id"]):
                continue
            row = {
                "ue_id": ue["ue_id"],
                "tick": tick,
                "features": list(qoe_featurize(ue["ue_id"], ues, cells).values),
                "label": float(ue["throughput_dl"]),
            }
            self.platform.sdl_write(self.xapp_id, TRAIN_SET, tick_key(tick, ue["ue_id"]), row)
            staged += 1
        return staged

    def training_rows(self, tick: int) -> List[Tuple[FeatureVector, float]]:
        """Rows of the window ending at `tick`, from TrainSet or recomputed from metrics."""
        rows = []
        for t in range(max(0, tick - self.train_window + 1), tick + 1):
            if self.retention:
                for record in self.platform.sdl_scan(self.xapp_id, TRAIN_SET, tick_prefix(t)):
                    row = record.value
                    if self._trains_on(row["ue_id"]):
                        rows.append((FeatureVector(tuple(row["features"])), float(row["label"])))
            else:
                ues, cells = self._snapshot(t)
                for ue in ues:
                    if self._trains_on(ue["ue_id"]):
                        rows.append((qoe_featurize(ue["ue_id"], ues, cells), float(ue["throughput_dl"])))
        return rows

    def retrain(self, tick: int) -> Optional[LinearModel]:
        rows = self.training_rows(tick)
        try:
            model = qoe_train(rows, self.lam, version=self.version + 1)
        except SingularSystemError as e:
            logger.warning("tick %d: retrain skipped, %s", tick, e)
            self.stats["retrain_failed"] += 1
            return None
        except NoDataError as e:
            logger.debug("tick %d: retrain skipped, %s", tick, e)
            return None
        self.version = model.model_version
        self.model = model
        self.history.append(model)
        self.platform.sdl_write(self.xapp_id, MODEL_STORE, model_key(model.model_version),
                                {**model.to_dict(), "trained_tick": tick})
        self.stats["retrains"] += 1
        logger.debug("tick %d: QoE model v%d trained on %d rows", tick, model.model_version, len(rows))
        return model

    def qoe_predict(self, ue: Mapping, cells: Mapping[str, Mapping]) -> Dict:
        """Prediction payload for one UE-Metric value."""
        if self.model is None:
            raise ModelError("no trained model")
        vectors = candidate_vectors(ue, cells)
        return {
            "ue_id": ue["ue_id"],
            "tick": ue["tick"],
            "serving_cell": ue["serving_cell"],
            "per_cell": predict_cells(self.model, vectors),
            "features": {cid: list(v.values) for cid, v in sorted(vectors.items())},
            "model_version": self.model.model_version,
        }

    def publish_prediction(self, tick: int, ue: Mapping, cells: Mapping[str, Mapping]) -> Dict:
        prediction = self.qoe_predict(ue, cells)
        self.platform.sdl_write(self.xapp_id, QOE_PREDICTION, tick_key(tick, ue["ue_id"]), prediction)
        self.send(MsgType.QOE_PREDICTION, prediction, tick)
        self.stats["predictions"] += 1
        return prediction
