"""
Brute-force k-nearest-neighbour regression under Euclidean distance.
"""

from dataclasses import dataclass

import numpy as np

from repagg_app.app.config import KNN_QUERY_CHUNK


@dataclass(frozen=True)
class NearestNeighbors:
    X: np.ndarray
    y: np.ndarray
    k: int

    def neighbors(self, queries: np.ndarray) -> np.ndarray:
        """
        Row indices of the k nearest training rows per query. Equal distances keep
        the lower row index.
        """
        k = min(self.k, len(self.X))
        result = np.empty((len(queries), k), dtype=np.int64)
        for start in range(0, len(queries), KNN_QUERY_CHUNK):
            chunk = queries[start : start + KNN_QUERY_CHUNK]
            distances = np.sqrt(np.sum((chunk[:, None, :] - self.X[None, :, :]) ** 2, axis=2))
            result[start : start + len(chunk)] = np.argsort(distances, axis=1, kind="stable")[:, :k]
        return result

    def predict_many(self, X: np.ndarray) -> np.ndarray:
        return self.y[self.neighbors(X)].mean(axis=1)


def fit_knn(X: np.ndarray, y: np.ndarray, k: int = 5) -> NearestNeighbors:
    return NearestNeighbors(X=X.copy(), y=y.copy(), k=k)
