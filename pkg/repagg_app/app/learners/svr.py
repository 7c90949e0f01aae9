"""
Epsilon-insensitive support vector regression with an RBF kernel, trained by
sequential minimal optimization.

The dual is solved in the 2l-variable form: variables t < l carry alpha_i with
sign +1 and linear term (epsilon - y_i); variables t >= l carry alpha*_i with
sign -1 and linear term (epsilon + y_i). Q[t, s] = sign_t * sign_s * K(x_t, x_s).
Working pairs are chosen by maximal violation with second-order gain.
"""

import logging
from collections import OrderedDict
from dataclasses import dataclass
from typing import Optional

import numpy as np

from repagg_app.app.config import DENSE_KERNEL_MAX_ROWS, KERNEL_CACHE_ROWS, SVR_MIN_ITERATIONS

logger = logging.getLogger(__name__)

TAU = 1e-12


def rbf_kernel(A: np.ndarray, B: np.ndarray, gamma: float) -> np.ndarray:
    """exp(-gamma * ||a - b||^2) for every pair of rows."""
    sq = np.sum(A * A, axis=1)[:, None] + np.sum(B * B, axis=1)[None, :] - 2.0 * (A @ B.T)
    return np.exp(-gamma * np.maximum(sq, 0.0))


class _KernelRows:
    """Kernel rows K[i, :], dense for small training sets, otherwise computed on demand with an LRU cache."""

    def __init__(self, X: np.ndarray, gamma: float):
        self.X = X
        self.gamma = gamma
        self._dense = rbf_kernel(X, X, gamma) if len(X) <= DENSE_KERNEL_MAX_ROWS else None
        self._cache: "OrderedDict[int, np.ndarray]" = OrderedDict()

    def row(self, i: int) -> np.ndarray:
        if self._dense is not None:
            return self._dense[i]
        cached = self._cache.get(i)
        if cached is not None:
            self._cache.move_to_end(i)
            return cached
        row = rbf_kernel(self.X[i : i + 1], self.X, self.gamma)[0]
        self._cache[i] = row
        if len(self._cache) > KERNEL_CACHE_ROWS:
            self._cache.popitem(last=False)
        return row


@dataclass(frozen=True)
class SupportVectorModel:
    support_vectors: np.ndarray
    coefficients: np.ndarray  # alpha_i - alpha*_i for each support vector
    bias: float
    gamma: float
    alphas: np.ndarray  # full 2l dual solution
    iterations: int
    converged: bool

    def predict_many(self, X: np.ndarray) -> np.ndarray:
        if len(self.support_vectors) == 0:
            return np.full(len(X), self.bias)
        return rbf_kernel(X, self.support_vectors, self.gamma) @ self.coefficients + self.bias


def _violation(signs: np.ndarray, alphas: np.ndarray, gradient: np.ndarray, C: float):
    """(i, Gmax, Gmin) of the maximal violating pair; -y*G over the up/low index sets."""
    minus_yg = -signs * gradient
    up = ((signs > 0) & (alphas < C)) | ((signs < 0) & (alphas > 0))
    low = ((signs > 0) & (alphas > 0)) | ((signs < 0) & (alphas < C))
    masked_up = np.where(up, minus_yg, -np.inf)
    i = int(np.argmax(masked_up))
    g_min = float(np.min(np.where(low, minus_yg, np.inf)))
    return i, float(masked_up[i]), g_min, minus_yg, low


def kkt_gap(signs: np.ndarray, alphas: np.ndarray, gradient: np.ndarray, C: float) -> float:
    """Gmax - Gmin; the solution satisfies KKT at tolerance tol when this is below tol."""
    _, g_max, g_min, _, _ = _violation(signs, alphas, gradient, C)
    return g_max - g_min


def _rho(signs: np.ndarray, alphas: np.ndarray, gradient: np.ndarray, C: float) -> float:
    yg = signs * gradient
    at_upper = alphas >= C
    at_lower = alphas <= 0
    free = ~at_upper & ~at_lower
    if free.any():
        return float(np.mean(yg[free]))
    # Bounds from variables stuck at 0 or C.
    ub_mask = (at_upper & (signs < 0)) | (at_lower & (signs > 0))
    lb_mask = (at_upper & (signs > 0)) | (at_lower & (signs < 0))
    ub = float(np.min(yg[ub_mask])) if ub_mask.any() else np.inf
    lb = float(np.max(yg[lb_mask])) if lb_mask.any() else -np.inf
    return (ub + lb) / 2.0


def fit_svr(
    X: np.ndarray,
    y: np.ndarray,
    C: float = 1.0,
    epsilon: float = 0.1,
    gamma: float = 0.2,
    tolerance: float = 1e-3,
    max_iter: Optional[int] = None,
) -> SupportVectorModel:
    """
    Train an RBF epsilon-SVR. Stops when the maximal KKT violation falls below
    `tolerance` or after `max_iter` pair updates (logged as non-converged).
    """
    n = len(X)
    signs = np.concatenate([np.ones(n), -np.ones(n)])
    alphas = np.zeros(2 * n)
    gradient = np.concatenate([epsilon - y, epsilon + y]).astype(float)
    kernel = _KernelRows(X, gamma)
    limit = max_iter if max_iter is not None else max(SVR_MIN_ITERATIONS, 100 * n)

    def q_row(t: int) -> np.ndarray:
        k = kernel.row(t % n)
        return signs[t] * signs * np.concatenate([k, k])

    iterations = 0
    converged = False
    while iterations < limit:
        i, g_max, g_min, minus_yg, low = _violation(signs, alphas, gradient, C)
        if g_max - g_min < tolerance:
            converged = True
            break

        k_i = kernel.row(i % n)
        k_i2 = np.concatenate([k_i, k_i])
        diffs = g_max - minus_yg
        quad = np.maximum(2.0 - 2.0 * k_i2, TAU)  # K(i,i) = K(j,j) = 1 for RBF
        candidates = low & (diffs > 0)
        gains = np.where(candidates, -(diffs * diffs) / quad, np.inf)
        j = int(np.argmin(gains))

        q_i = q_row(i)
        q_j = q_row(j)
        old_i, old_j = alphas[i], alphas[j]

        if signs[i] != signs[j]:
            quad_coef = max(2.0 + 2.0 * q_i[j], TAU)
            delta = (-gradient[i] - gradient[j]) / quad_coef
            diff = alphas[i] - alphas[j]
            alphas[i] += delta
            alphas[j] += delta
            if diff > 0:
                if alphas[j] < 0:
                    alphas[j] = 0.0
                    alphas[i] = diff
            elif alphas[i] < 0:
                alphas[i] = 0.0
                alphas[j] = -diff
            if diff > 0:
                if alphas[i] > C:
                    alphas[i] = C
                    alphas[j] = C - diff
            elif alphas[j] > C:
                alphas[j] = C
                alphas[i] = C + diff
        else:
            quad_coef = max(2.0 - 2.0 * q_i[j], TAU)
            delta = (gradient[i] - gradient[j]) / quad_coef
            total = alphas[i] + alphas[j]
            alphas[i] -= delta
            alphas[j] += delta
            if total > C:
                if alphas[i] > C:
                    alphas[i] = C
                    alphas[j] = total - C
            elif alphas[j] < 0:
                alphas[j] = 0.0
                alphas[i] = total
            if total > C:
                if alphas[j] > C:
                    alphas[j] = C
                    alphas[i] = total - C
            elif alphas[i] < 0:
                alphas[i] = 0.0
                alphas[j] = total

        gradient += q_i * (alphas[i] - old_i) + q_j * (alphas[j] - old_j)
        iterations += 1

    if not converged:
        logger.warning(
            "SVR reached its iteration cap before convergence",
            extra={"iterations": iterations, "kkt_gap": kkt_gap(signs, alphas, gradient, C)},
        )

    coefficients = alphas[:n] - alphas[n:]
    support = np.flatnonzero(coefficients != 0.0)
    return SupportVectorModel(
        support_vectors=X[support].copy(),
        coefficients=coefficients[support].copy(),
        bias=-_rho(signs, alphas, gradient, C),
        gamma=gamma,
        alphas=alphas.copy(),
        iterations=iterations,
        converged=converged,
    )
