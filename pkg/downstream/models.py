"""
downstream/models.py
The downstream model zoo fitted on (transformed) covariates and labels.

Models read covariates only; the sensitive block is never an argument.
"""

from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence

import numpy as np
from scipy.linalg import solve
from scipy.optimize import minimize
from scipy.spatial.distance import cdist
from scipy.special import expit

from config.app_config import (
    DEFAULT_BATCH_SIZE,
    DEFAULT_HIDDEN_WIDTH,
    DEFAULT_KNN_NEIGHBORS,
    DEFAULT_LEARNING_RATE,
)
from downstream.feature_map import FeatureMap
from preprocess.config import PreprocessorConfig
from preprocess.upstream import UpstreamModel, fit_supervised
from tensor_nn import as_matrix, as_vector, check_rows
from utils.errors import FitError, InputError, ParameterError, ShapeError
from utils.logger import get_logger

logger = get_logger(__name__)

MODEL_KINDS = ("logistic_regression", "knn", "small_mlp", "random_feature_linear")
TASKS = ("classification", "regression")
KNN_CHUNK_ROWS = 1024


@dataclass(frozen=True)
class DownstreamSettings:
    knn_neighbors: int = DEFAULT_KNN_NEIGHBORS
    l2: float = 1e-4
    max_iter: int = 500
    rff_features: int = 200
    rff_bandwidth: float = 1.0
    upstream_width: int = DEFAULT_HIDDEN_WIDTH
    upstream_depth: int = 2
    mlp_epochs: int = 100
    mlp_batch_size: int = DEFAULT_BATCH_SIZE
    mlp_learning_rate: float = DEFAULT_LEARNING_RATE

    def __post_init__(self):
        if self.knn_neighbors < 1:
            raise ParameterError(f"knn_neighbors: must be >= 1, got {self.knn_neighbors}")
        if self.l2 < 0:
            raise ParameterError(f"l2: must be >= 0, got {self.l2}")
        for name in ("max_iter", "rff_features", "upstream_width", "upstream_depth", "mlp_epochs", "mlp_batch_size"):
            if getattr(self, name) < 1:
                raise ParameterError(f"{name}: must be >= 1, got {getattr(self, name)}")

    @property
    def mlp_width(self) -> int:
        """Half the upstream width."""
        return max(1, self.upstream_width // 2)


@dataclass(eq=False)
class DownstreamModel:
    kind: str
    task: str
    feature_map: FeatureMap
    params: dict = field(default_factory=dict)

    @property
    def input_width(self) -> int:
        return self.feature_map.input_width

    def score(self, x) -> np.ndarray:
        x = as_matrix(x, "covariates")
        if x.shape[1] != self.input_width:
            raise ShapeError(f"{self.kind} was fitted on {self.input_width} columns, got {x.shape[1]}")
        z = self.feature_map.apply(x)
        if self.kind == "knn":
            return _knn_predict(z, self.params["train_x"], self.params["train_y"], self.params["k"])
        if self.kind == "small_mlp":
            return self.params["model"].predict(z)
        if self.kind == "random_feature_linear":
            z = self.params["rff"].apply(z)
        return _linear_predict(z, self.params["weight"], self.params["bias"], self.task)

    # ------------------------------------------------------------------
    def to_dict(self) -> dict:
        p = self.params
        if self.kind == "knn":
            params = {"k": p["k"], "train_x": p["train_x"].tolist(), "train_y": p["train_y"].tolist()}
        elif self.kind == "small_mlp":
            params = {"model": p["model"].to_dict()}
        else:
            params = {"weight": p["weight"].tolist(), "bias": float(p["bias"])}
            if self.kind == "random_feature_linear":
                params["rff"] = p["rff"].to_dict()
        return {"kind": self.kind, "task": self.task, "feature_map": self.feature_map.to_dict(), "params": params}

    @classmethod
    def from_dict(cls, doc: dict) -> "DownstreamModel":
        try:
            kind, p = doc["kind"], doc["params"]
            if kind == "knn":
                params = {
                    "k": int(p["k"]),
                    "train_x": np.asarray(p["train_x"], dtype=np.float64),
                    "train_y": np.asarray(p["train_y"], dtype=np.float64),
                }
            elif kind == "small_mlp":
                params = {"model": UpstreamModel.from_dict(p["model"])}
            elif kind in ("logistic_regression", "random_feature_linear"):
                params = {"weight": np.asarray(p["weight"], dtype=np.float64), "bias": float(p["bias"])}
                if kind == "random_feature_linear":
                    params["rff"] = FeatureMap.from_dict(p["rff"])
            else:
                raise InputError(f"unknown downstream kind '{kind}'")
            return cls(kind, doc["task"], FeatureMap.from_dict(doc["feature_map"]), params)
        except KeyError as e:
            raise InputError(f"malformed downstream document: missing {e}") from e


# ----------------------------------------------------------------------
# Per-kind fitting and scoring
# ----------------------------------------------------------------------
def _linear_predict(z, weight, bias, task) -> np.ndarray:
    logits = z @ weight + bias
    return expit(logits) if task == "classification" else logits


def _fit_logistic(z, y, l2, max_iter):
    n, d = z.shape

    def objective(theta):
        w, b = theta[:d], theta[d]
        logits = z @ w + b
        loss = np.mean(np.logaddexp(0.0, logits) - y * logits) + 0.5 * l2 * w @ w
        g = (expit(logits) - y) / n
        return loss, np.concatenate([z.T @ g + l2 * w, [g.sum()]])

    result = minimize(objective, np.zeros(d + 1), jac=True, method="L-BFGS-B", options={"maxiter": max_iter})
    if not np.all(np.isfinite(result.x)):
        raise FitError("logistic regression diverged")
    return result.x[:d], float(result.x[d])


def _fit_ridge(z, y, l2):
    z_mean, y_mean = z.mean(axis=0), y.mean()
    zc, yc = z - z_mean, y - y_mean
    n, d = z.shape
    gram = zc.T @ zc / n + max(l2, 1e-10) * np.eye(d)
    weight = solve(gram, zc.T @ yc / n, assume_a="pos")
    return weight, float(y_mean - z_mean @ weight)


def _fit_linear(z, y, task, settings):
    if task == "classification":
        return _fit_logistic(z, y, settings.l2, settings.max_iter)
    return _fit_ridge(z, y, settings.l2)


def _knn_predict(z, train_x, train_y, k) -> np.ndarray:
    k = min(k, len(train_x))
    out = np.empty(len(z))
    for start in range(0, len(z), KNN_CHUNK_ROWS):
        dist = cdist(z[start:start + KNN_CHUNK_ROWS], train_x, "sqeuclidean")
        nearest = np.argpartition(dist, k - 1, axis=1)[:, :k]
        out[start:start + KNN_CHUNK_ROWS] = train_y[nearest].mean(axis=1)
    return out


def _fit_mlp(z, y, task, settings, seed) -> UpstreamModel:
    config = PreprocessorConfig(
        hidden_width=settings.mlp_width,
        depth=settings.upstream_depth,
        epochs=settings.mlp_epochs,
        batch_size=settings.mlp_batch_size,
        lr_h=settings.mlp_learning_rate,
        dropout_rate=0.0,
        seed=seed,
    )
    return fit_supervised(z, y, task, config, label="small_mlp")


def _check_training_data(x, y, task):
    if task not in TASKS:
        raise ParameterError(f"task must be one of {TASKS}, got '{task}'")
    x = as_matrix(x, "covariates")
    y = as_vector(y, "outcome")
    n = check_rows(("covariates", x), ("outcome", y))
    if n == 0:
        raise FitError("cannot fit on an empty training set")
    if task == "classification":
        if not np.all(np.isin(y, (0.0, 1.0))):
            raise FitError("classification labels must be 0/1")
        if len(np.unique(y)) < 2:
            raise FitError("classification labels contain a single class")
    return x, y


def compose(
    feature_map: FeatureMap,
    kind: str,
    x,
    y,
    settings: Optional[DownstreamSettings] = None,
    seed: int = 0,
    task: str = "classification",
) -> DownstreamModel:
    """Fit ``kind`` on f_e(x); the result scores raw covariates through f_e."""
    if kind not in MODEL_KINDS:
        raise ParameterError(f"unknown downstream kind '{kind}', expected one of {MODEL_KINDS}")
    settings = settings or DownstreamSettings()
    x, y = _check_training_data(x, y, task)
    z = feature_map.apply(x)

    if kind == "knn":
        params = {"k": settings.knn_neighbors, "train_x": z.copy(), "train_y": y.copy()}
    elif kind == "small_mlp":
        params = {"model": _fit_mlp(z, y, task, settings, seed)}
    elif kind == "random_feature_linear":
        rff = FeatureMap.random_fourier(z.shape[1], settings.rff_features, settings.rff_bandwidth, seed)
        weight, bias = _fit_linear(rff.apply(z), y, task, settings)
        params = {"weight": weight, "bias": bias, "rff": rff}
    else:
        weight, bias = _fit_linear(z, y, task, settings)
        params = {"weight": weight, "bias": bias}
    return DownstreamModel(kind=kind, task=task, feature_map=feature_map, params=params)


def fit(
    kind: str,
    x,
    y,
    settings: Optional[DownstreamSettings] = None,
    seed: int = 0,
    task: str = "classification",
) -> DownstreamModel:
    x = as_matrix(x, "covariates")
    return compose(FeatureMap.identity(x.shape[1]), kind, x, y, settings, seed, task)


def score(model: DownstreamModel, x) -> np.ndarray:
    return model.score(x)


def fit_zoo(
    kinds: Sequence[str],
    x,
    y,
    settings: Optional[DownstreamSettings] = None,
    seed: int = 0,
    task: str = "classification",
) -> Dict[str, DownstreamModel]:
    """One fitted model per kind; model i is seeded with ``seed + i``."""
    zoo = {}
    for i, kind in enumerate(kinds):
        zoo[kind] = fit(kind, x, y, settings, seed + i, task)
        logger.debug(f"fitted downstream {kind}")
    return zoo
