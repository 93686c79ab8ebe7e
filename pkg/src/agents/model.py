"""
QoE throughput model: feature schema, ridge regression and candidate-cell featurization.
"""

import math
from dataclasses import dataclass
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

import config
from agents.errors import NoDataError, SchemaMismatchError, SingularSystemError
from ran.radio import sinr_from_powers

SCHEMA_ID = "qoe-v1"
FEATURES = (
    "sinr_serving",
    "rsrp_serving",
    "prb_usage",
    "nbr1_rsrp",
    "nbr2_rsrp",
    "nbr3_rsrp",
    "cell_throughput",
    "cell_load",
)
N_FEATURES = len(FEATURES)


@dataclass(frozen=True)
class FeatureVector:
    values: Tuple[float, ...]
    schema_id: str = SCHEMA_ID

    def __post_init__(self):
        if len(self.values) != N_FEATURES:
            raise SchemaMismatchError(f"expected {N_FEATURES} features, got {len(self.values)}")
        if not all(math.isfinite(v) for v in self.values):
            raise SchemaMismatchError("feature values must be finite")

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)


@dataclass(frozen=True)
class LinearModel:
    weights: Tuple[float, ...]
    bias: float
    lam: float
    training_row_count: int
    model_version: int = 0
    feature_ranges: Tuple[Tuple[float, float], ...] = ()
    schema_id: str = SCHEMA_ID

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("ridge lambda must be >= 0")

    def raw(self, x: Sequence[float]) -> float:
        if len(x) != len(self.weights):
            raise SchemaMismatchError(f"model expects {len(self.weights)} features, got {len(x)}")
        return float(np.dot(self.weights, x) + self.bias)

    def predict(self, vector: FeatureVector) -> float:
        """Predicted Mbps, clamped at zero."""
        if vector.schema_id != self.schema_id:
            raise SchemaMismatchError(f"schema {vector.schema_id} != {self.schema_id}")
        return max(0.0, self.raw(vector.values))

    def to_dict(self) -> Dict:
        return {
            "weights": list(self.weights),
            "bias": self.bias,
            "lambda": self.lam,
            "rows": self.training_row_count,
            "version": self.model_version,
            "feature_ranges": [list(r) for r in self.feature_ranges],
            "schema_id": self.schema_id,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "LinearModel":
        return cls(
            weights=tuple(float(w) for w in data["weights"]),
            bias=float(data["bias"]),
            lam=float(data["lambda"]),
            training_row_count=int(data["rows"]),
            model_version=int(data.get("version", 0)),
            feature_ranges=tuple((float(a), float(b)) for a, b in data.get("feature_ranges", [])),
            schema_id=data.get("schema_id", SCHEMA_ID),
        )


def ridge_fit(X, y, lam: float) -> Tuple[np.ndarray, float]:
    """
    Ridge regression with an unregularised bias, solved directly.

    Solves (A^T A + diag(lam, ..., lam, 0)) theta = A^T y with A = [X | 1].

    Raises:
        SingularSystemError: system singular (lam = 0 with rank-deficient X)
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float)
    if X.shape[0] != y.shape[0]:
        raise ValueError("X and y row counts differ")
    A = np.hstack([X, np.ones((X.shape[0], 1))])
    penalty = np.full(A.shape[1], float(lam))
    penalty[-1] = 0.0
    gram = A.T @ A + np.diag(penalty)
    if lam == 0 and np.linalg.matrix_rank(gram) < gram.shape[0]:
        raise SingularSystemError("normal equations are singular; retry with lambda > 0")
    try:
        theta = np.linalg.solve(gram, A.T @ y)
    except np.linalg.LinAlgError as e:
        raise SingularSystemError(str(e)) from e
    return theta[:-1], float(theta[-1])


def lstsq_fit(X, y) -> Tuple[np.ndarray, float]:
    """Unregularised least squares on [X | 1] (minimum-norm when rank-deficient)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    A = np.hstack([X, np.ones((X.shape[0], 1))])
    theta, *_ = np.linalg.lstsq(A, np.asarray(y, dtype=float), rcond=None)
    return theta[:-1], float(theta[-1])


def qoe_train(rows: Sequence[Tuple[FeatureVector, float]], lam: float = config.RIDGE_LAMBDA,
              version: int = 0) -> LinearModel:
    """
    Fit the QoE model on (features, observed Mbps) rows.

    Raises:
        NoDataError: fewer than two rows
        SingularSystemError: see ridge_fit
    """
    if len(rows) < 2:
        raise NoDataError(f"need at least 2 training rows, got {len(rows)}")
    X = np.array([fv.values for fv, _ in rows], dtype=float)
    y = np.array([label for _, label in rows], dtype=float)
    weights, bias = ridge_fit(X, y, lam)
    ranges = tuple((float(lo), float(hi)) for lo, hi in zip(X.min(axis=0), X.max(axis=0)))
    return LinearModel(
        weights=tuple(float(w) for w in weights),
        bias=bias,
        lam=lam,
        training_row_count=len(rows),
        model_version=version,
        feature_ranges=ranges,
    )


# ----------------------------------------------------------------------
# Featurization
# ----------------------------------------------------------------------

def _cell_stats(cell: Optional[Mapping]) -> Tuple[int, float, float]:
    """(connected, mean per-UE throughput, load) of a Cell-Metric value; zeros when unknown."""
    if not cell:
        return 0, 0.0, 0.0
    n = int(cell["connected_ue_count"])
    mean = cell["aggregate_throughput"] / n if n else 0.0
    return n, float(mean), float(cell["load"])


def _padded(rsrps: Iterable[float]) -> List[float]:
    slots = sorted(rsrps, reverse=True)[:config.NEIGHBOUR_SLOTS]
    return slots + [config.RSRP_SENTINEL_DBM] * (config.NEIGHBOUR_SLOTS - len(slots))


def featurize(ue: Mapping, cells: Mapping[str, Mapping]) -> FeatureVector:
    """Serving-cell feature vector of one UE-Metric value."""
    _, cell_mean, load = _cell_stats(cells.get(ue["serving_cell"]))
    return FeatureVector((
        float(ue["sinr_serving"]),
        float(ue["rsrp_serving"]),
        float(ue["prb_usage"]),
        *_padded(rsrp for _, rsrp in ue["neighbours"]),
        cell_mean,
        load,
    ))


def qoe_featurize(ue_id: str, history: Sequence[Mapping], cells: Mapping[str, Mapping]) -> FeatureVector:
    """
    Feature vector from the latest UE-Metric record of `ue_id` in `history`.

    Raises:
        NoDataError: no record for the UE
    """
    records = [r for r in history if r["ue_id"] == ue_id]
    if not records:
        raise NoDataError(f"no metrics for {ue_id}")
    return featurize(max(records, key=lambda r: r["tick"]), cells)


def candidate_vectors(ue: Mapping, cells: Mapping[str, Mapping]) -> Dict[str, FeatureVector]:
    """
    Feature vectors for the serving cell and each reported neighbour.

    A neighbour's SINR is estimated from the reported RSRPs, its PRB share
    assumes the UE joins it, and its neighbour slots hold the other reported cells.
    """
    serving = ue["serving_cell"]
    reported = {serving: float(ue["rsrp_serving"])}
    reported.update({cid: float(rsrp) for cid, rsrp in ue["neighbours"]})
    vectors = {serving: featurize(ue, cells)}
    for cell_id, rsrp in reported.items():
        if cell_id == serving:
            continue
        others = [p for cid, p in reported.items() if cid != cell_id]
        n, cell_mean, load = _cell_stats(cells.get(cell_id))
        vectors[cell_id] = FeatureVector((
            sinr_from_powers(rsrp, others),
            rsrp,
            100.0 / (n + 1),
            *_padded(others),
            cell_mean,
            load,
        ))
    return vectors


def predict_cells(model: LinearModel, vectors: Mapping[str, FeatureVector]) -> Dict[str, float]:
    return {cell_id: model.predict(v) for cell_id, v in sorted(vectors.items())}
