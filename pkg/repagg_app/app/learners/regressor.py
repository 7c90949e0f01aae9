"""
Uniform fit / predict entry points over the four reliability regressors.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from repagg_app.app.errors import ModelError
from repagg_app.app.learners.knn import NearestNeighbors, fit_knn
from repagg_app.app.learners.linear import LinearModel, fit_linear
from repagg_app.app.learners.svr import SupportVectorModel, fit_svr
from repagg_app.app.learners.tree import RegressionTree, fit_tree
from repagg_app.app.schemas import RegressorSpec

logger = logging.getLogger(__name__)

FittedModel = Union[LinearModel, RegressionTree, SupportVectorModel, NearestNeighbors]


@dataclass(frozen=True)
class TrainedRegressor:
    """A fitted model; immutable and safe to share between threads."""

    spec: RegressorSpec
    model: FittedModel
    n_features: int

    def predict_many(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.n_features:
            raise ModelError(f"expected {self.n_features} features per row, got {X.shape[1]}")
        if not np.all(np.isfinite(X)):
            raise ModelError("query contains non-finite values")
        return self.model.predict_many(X)

    @property
    def iterations(self) -> Optional[int]:
        return self.model.iterations if isinstance(self.model, SupportVectorModel) else None

    @property
    def converged(self) -> Optional[bool]:
        return self.model.converged if isinstance(self.model, SupportVectorModel) else None


def _check_training(X: np.ndarray, y: np.ndarray) -> None:
    if X.ndim != 2 or y.ndim != 1:
        raise ModelError(f"expected a 2-D feature matrix and 1-D targets, got {X.shape} and {y.shape}")
    if len(X) == 0:
        raise ModelError("cannot fit on an empty training set")
    if len(X) != len(y):
        raise ModelError(f"{len(X)} feature rows but {len(y)} targets")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise ModelError("training data contains non-finite values")


def fit(spec: RegressorSpec, X: Sequence[Sequence[float]], y: Sequence[float]) -> TrainedRegressor:
    """
    Train the algorithm named by `spec` on scaled features and scaled reliability.

    Raises:
        ModelError: empty or mismatched training data, non-finite values
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    _check_training(X, y)

    if spec.algorithm == "LR":
        model: FittedModel = fit_linear(X, y)
    elif spec.algorithm == "RT":
        model = fit_tree(X, y, min_leaf=spec.cart_min_leaf, max_depth=spec.cart_max_depth)
    elif spec.algorithm == "SVR":
        model = fit_svr(
            X,
            y,
            C=spec.svr_c,
            epsilon=spec.svr_epsilon,
            gamma=spec.gamma_for(X.shape[1]),
            tolerance=spec.svr_tolerance,
            max_iter=spec.svr_max_iter,
        )
    else:
        model = fit_knn(X, y, k=spec.knn_k)

    return TrainedRegressor(spec=spec, model=model, n_features=X.shape[1])


def predict(model: TrainedRegressor, x: Sequence[float]) -> float:
    """
    Predicted scaled reliability for a single feature row.

    Raises:
        ModelError: wrong number of features
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ModelError(f"expected a single feature row, got shape {x.shape}")
    return float(model.predict_many(x[None, :])[0])
