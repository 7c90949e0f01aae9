"""
CART regression tree grown greedily by variance (sum of squared errors) reduction.

Split candidates are midpoints between consecutive distinct values of a feature.
Ties between candidates keep the lowest feature index, then the lowest threshold.
"""

from dataclasses import dataclass
from typing import Iterator, Optional, Tuple

import numpy as np

from repagg_app.app.config import SPLIT_TOLERANCE


@dataclass(frozen=True)
class TreeNode:
    value: float
    n_samples: int
    feature: int = -1
    threshold: float = 0.0
    left: Optional["TreeNode"] = None
    right: Optional["TreeNode"] = None

    @property
    def is_leaf(self) -> bool:
        return self.left is None


@dataclass(frozen=True)
class RegressionTree:
    root: TreeNode
    min_leaf: int
    max_depth: int

    def leaf_for(self, x: np.ndarray) -> TreeNode:
        node = self.root
        while not node.is_leaf:
            node = node.left if x[node.feature] <= node.threshold else node.right
        return node

    def predict_many(self, X: np.ndarray) -> np.ndarray:
        return np.array([self.leaf_for(x).value for x in X], dtype=float)

    def leaves(self) -> Iterator[TreeNode]:
        stack = [self.root]
        while stack:
            node = stack.pop()
            if node.is_leaf:
                yield node
            else:
                stack.extend([node.right, node.left])

    @property
    def depth(self) -> int:
        def _depth(node: TreeNode) -> int:
            return 0 if node.is_leaf else 1 + max(_depth(node.left), _depth(node.right))

        return _depth(self.root)


def _sse(y: np.ndarray) -> float:
    return float(np.sum((y - y.mean()) ** 2))


def _best_split(X: np.ndarray, y: np.ndarray, min_leaf: int) -> Optional[Tuple[int, float, float]]:
    """
    Lowest total child SSE over all features and midpoints.

    Returns:
        (feature, threshold, child_sse) or None if no admissible split exists
    """
    n = len(y)
    best: Optional[Tuple[int, float, float]] = None
    left_sizes = np.arange(1, n)

    for feature in range(X.shape[1]):
        order = np.argsort(X[:, feature], kind="stable")
        xs = X[order, feature]
        ys = y[order]

        running_sum = np.cumsum(ys)
        running_sq = np.cumsum(ys * ys)
        csum, csq = running_sum[:-1], running_sq[:-1]
        total, total_sq = running_sum[-1], running_sq[-1]

        right_sizes = n - left_sizes
        left_sse = csq - csum ** 2 / left_sizes
        right_sse = (total_sq - csq) - (total - csum) ** 2 / right_sizes
        cost = np.maximum(left_sse, 0.0) + np.maximum(right_sse, 0.0)

        admissible = (xs[:-1] < xs[1:]) & (left_sizes >= min_leaf) & (right_sizes >= min_leaf)
        if not admissible.any():
            continue
        candidates = np.flatnonzero(admissible)
        position = candidates[int(np.argmin(cost[candidates]))]
        candidate_cost = float(cost[position])

        if best is None or candidate_cost < best[2] - SPLIT_TOLERANCE:
            threshold = float((xs[position] + xs[position + 1]) / 2.0)
            if threshold >= xs[position + 1]:
                threshold = float(xs[position])
            best = (feature, threshold, candidate_cost)

    return best


def _grow(X: np.ndarray, y: np.ndarray, depth: int, min_leaf: int, max_depth: int) -> TreeNode:
    leaf = TreeNode(value=float(np.mean(y)), n_samples=len(y))
    if depth >= max_depth or len(y) < 2 * min_leaf:
        return leaf

    parent_sse = _sse(y)
    split = _best_split(X, y, min_leaf)
    if split is None:
        return leaf

    feature, threshold, child_sse = split
    if parent_sse - child_sse <= SPLIT_TOLERANCE:
        return leaf

    goes_left = X[:, feature] <= threshold
    # running-sum costs can drift; the actual partition must still reduce SSE
    if _sse(y[goes_left]) + _sse(y[~goes_left]) >= parent_sse - SPLIT_TOLERANCE:
        return leaf
    return TreeNode(
        value=leaf.value,
        n_samples=len(y),
        feature=feature,
        threshold=threshold,
        left=_grow(X[goes_left], y[goes_left], depth + 1, min_leaf, max_depth),
        right=_grow(X[~goes_left], y[~goes_left], depth + 1, min_leaf, max_depth),
    )


def fit_tree(X: np.ndarray, y: np.ndarray, min_leaf: int = 5, max_depth: int = 12) -> RegressionTree:
    """Grow a CART tree; every leaf keeps at least `min_leaf` rows."""
    return RegressionTree(root=_grow(X, y, 0, min_leaf, max_depth), min_leaf=min_leaf, max_depth=max_depth)
