"""
Cross-Validation Tool for producing out-of-fold reliability predictions and the
aggregation weights derived from them.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import List, Sequence, Tuple

import numpy as np

from repagg_app.app.config import (
    COUNT_FEATURES,
    DEFAULT_K_FOLDS,
    DEFAULT_SEED,
    DEFAULT_WEIGHT_FLOOR,
    PROFILE_COLUMNS,
    PROFILE_FEATURES,
)
from repagg_app.app.errors import ConfigError, DataError, InvariantViolation, ModelError
from repagg_app.app.learners import fit
from repagg_app.app.schemas import FoldDiagnostic, FoldPlan, RegressorSpec, WeightMap
from repagg_app.app.tables import ProfileMatrix
from repagg_app.app.tools.profile_features import fit_scaling, scale_matrix

logger = logging.getLogger(__name__)


def kfold_split(consumer_ids: Sequence[int], k: int = DEFAULT_K_FOLDS, seed: int = DEFAULT_SEED) -> FoldPlan:
    """
    Deal consumers into k folds: sort ascending, shuffle with a seeded
    permutation, then assign round-robin.

    Raises:
        ConfigError: k < 2 or a negative seed
        DataError: fewer consumers than folds
    """
    if k < 2:
        raise ConfigError(f"k-folds must be at least 2, got {k}")
    if seed < 0:
        raise ConfigError(f"seed must be nonnegative, got {seed}")

    ordered = np.unique(np.asarray(consumer_ids, dtype=np.int64))
    if k > len(ordered):
        raise DataError(f"cannot split {len(ordered)} consumers into {k} folds")

    shuffled = ordered[np.random.default_rng(seed).permutation(len(ordered))]
    assignment = {int(cid): position % k for position, cid in enumerate(shuffled)}
    return FoldPlan(k=k, seed=seed, assignment=assignment)


def reliability_to_weight(predicted: float, floor: float = DEFAULT_WEIGHT_FLOOR) -> float:
    """
    Turn a predicted scaled reliability (an error: lower is better) into a weight
    in [floor, 1]: clamp to [0, 1], invert, then apply the floor.

    Raises:
        ModelError: non-finite prediction
    """
    if not math.isfinite(predicted):
        raise ModelError(f"cannot convert non-finite prediction {predicted} to a weight")
    clamped = min(max(float(predicted), 0.0), 1.0)
    return max(floor, 1.0 - clamped)


def _weights_of(predicted: np.ndarray, floor: float) -> np.ndarray:
    if not np.all(np.isfinite(predicted)):
        raise ModelError("cross-validation produced non-finite predictions")
    return np.maximum(floor, 1.0 - np.clip(predicted, 0.0, 1.0))


def _fold_matrices(
    matrix: ProfileMatrix, train: np.ndarray, test: np.ndarray, strict_scaling: bool
) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """(X_train, y_train, X_test, y_test) on the scaled scale."""
    n_features = len(PROFILE_FEATURES)
    if strict_scaling:
        scaling = fit_scaling(matrix.raw[train])
        train_scaled = scaling.transform(matrix.raw[train])
        test_scaled = scaling.transform(matrix.raw[test], clip=True)
    else:
        train_scaled = matrix.scaled[train]
        test_scaled = matrix.scaled[test]
    return (
        train_scaled[:, :n_features],
        train_scaled[:, n_features],
        test_scaled[:, :n_features],
        test_scaled[:, n_features],
    )


def _matrix_for(matrix: ProfileMatrix, spec: RegressorSpec) -> ProfileMatrix:
    """LR with lr_log_transform trains on log1p counts; everything else on the matrix as given."""
    wants_log = spec.algorithm == "LR" and spec.lr_log_transform
    if wants_log == matrix.log_counts:
        return matrix
    if matrix.log_counts:
        raw = matrix.raw.copy()
        for name in COUNT_FEATURES:
            column = PROFILE_COLUMNS.index(name)
            raw[:, column] = np.expm1(raw[:, column])
        return scale_matrix(matrix.consumer_ids, raw)
    logger.debug("Applying log1p to count features for LR")
    return scale_matrix(matrix.consumer_ids, matrix.raw, log_counts=True)


def predict_weights_cv(
    matrix: ProfileMatrix,
    spec: RegressorSpec,
    plan: FoldPlan,
    floor: float = DEFAULT_WEIGHT_FLOOR,
    strict_scaling: bool = False,
    threads: int = 1,
) -> WeightMap:
    """
    Train on every fold's complement and predict the fold, so each consumer
    receives exactly one out-of-fold reliability prediction.

    Args:
        matrix: Scaled profile matrix
        spec: Regressor and hyperparameters
        plan: Fold assignment covering exactly the matrix's consumers
        floor: Lowest admissible weight
        strict_scaling: Refit Min-Max bounds on each training fold
        threads: Worker threads for folds; never changes the result

    Returns:
        WeightMap with predictions, weights and per-fold diagnostics
    """
    ids = matrix.consumer_ids
    if set(plan.assignment) != set(int(cid) for cid in ids):
        raise InvariantViolation("fold plan does not cover exactly the profiled consumers")

    working = _matrix_for(matrix, spec)
    fold_of = np.array([plan.assignment[int(cid)] for cid in ids], dtype=np.int64)

    def run_fold(fold: int) -> Tuple[np.ndarray, np.ndarray, FoldDiagnostic]:
        test = np.flatnonzero(fold_of == fold)
        train = np.flatnonzero(fold_of != fold)
        X_train, y_train, X_test, y_test = _fold_matrices(working, train, test, strict_scaling)
        model = fit(spec, X_train, y_train)
        predicted = model.predict_many(X_test)
        diagnostic = FoldDiagnostic(
            fold=fold,
            train_size=len(train),
            test_size=len(test),
            mae=float(np.mean(np.abs(predicted - y_test))),
            iterations=model.iterations,
            converged=model.converged,
        )
        logger.info("Fold trained", extra={"algorithm": spec.algorithm, **diagnostic.model_dump()})
        return test, predicted, diagnostic

    folds = range(plan.k)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run_fold, folds))
    else:
        results = [run_fold(fold) for fold in folds]

    predicted_all = np.full(len(ids), np.nan)
    diagnostics: List[FoldDiagnostic] = []
    for test, predicted, diagnostic in results:
        predicted_all[test] = predicted
        diagnostics.append(diagnostic)

    if np.isnan(predicted_all).any():
        raise InvariantViolation("a consumer received no out-of-fold prediction")

    weights = _weights_of(predicted_all, floor)
    weight_map = WeightMap(
        weights={int(cid): float(w) for cid, w in zip(ids, weights)},
        predicted={int(cid): float(p) for cid, p in zip(ids, predicted_all)},
        floor=floor,
        fold_diagnostics=diagnostics,
    )
    logger.info(
        "Cross-validated weights computed",
        extra={"algorithm": spec.algorithm, "folds": plan.k, "cv_mae": weight_map.cv_mae},
    )
    return weight_map
