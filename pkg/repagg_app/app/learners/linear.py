"""
Ordinary least squares with an intercept, solved through the normal equations.
"""

import logging
from dataclasses import dataclass

import numpy as np

from repagg_app.app.config import RIDGE_JITTER

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class LinearModel:
    intercept: float
    coefficients: np.ndarray

    def predict_many(self, X: np.ndarray) -> np.ndarray:
        return self.intercept + X @ self.coefficients


def fit_linear(X: np.ndarray, y: np.ndarray) -> LinearModel:
    """
    Solve (A^T A) beta = A^T y with A = [1, X]. A rank-deficient normal system gets
    a 1e-8 ridge on its diagonal.
    """
    design = np.column_stack([np.ones(len(X)), X])
    normal = design.T @ design
    rhs = design.T @ y

    if np.linalg.matrix_rank(normal) < normal.shape[0]:
        logger.info("Singular normal system, adding ridge jitter", extra={"jitter": RIDGE_JITTER})
        normal = normal + RIDGE_JITTER * np.eye(normal.shape[0])
    beta = np.linalg.solve(normal, rhs)

    return LinearModel(intercept=float(beta[0]), coefficients=beta[1:].copy())
