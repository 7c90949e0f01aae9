"""
Metrics Tool for scoring aggregation methods: rating-level MAE, Kendall tau-b
between score tables, top-k% tau curves and MAE rankings.
"""

import logging
import math
from typing import List, Mapping, Sequence, Union

import numpy as np
import pandas as pd
from scipy.stats import kendalltau

from repagg_app.app.config import KENDALL_THRESHOLDS, MIN_TOPK_SIZE, TAU_UNIT_TOLERANCE
from repagg_app.app.errors import DataError, MissingScoreError, ProductSetMismatchError
from repagg_app.app.schemas import KendallCurve, KendallPoint
from repagg_app.app.tables import ProductScoreTable, RatingTable

logger = logging.getLogger(__name__)

ScoredProducts = Union[ProductScoreTable, pd.Series, Mapping[int, float]]


def _as_series(scored: ScoredProducts) -> pd.Series:
    if isinstance(scored, ProductScoreTable):
        return scored.scores
    if isinstance(scored, pd.Series):
        return scored.astype(float)
    return pd.Series(dict(scored), dtype=float)


def mae(table: RatingTable, scores: ProductScoreTable) -> float:
    """
    Mean over products of the mean absolute gap between each rating and the
    product's score.

    Raises:
        MissingScoreError: a rated product has no score
        DataError: empty table
    """
    if len(table) == 0:
        raise DataError("cannot compute MAE on an empty rating table")

    per_product = scores.scores.reindex(table.product_ids).to_numpy(dtype=float)
    missing = np.isnan(per_product)
    if missing.any():
        first = int(table.product_ids[np.argmax(missing)])
        raise MissingScoreError(f"{int(missing.sum())} rated products have no score (first: product {first})")

    gaps = np.abs(table.ratings - per_product[table.product_index])
    mean_gap = np.bincount(table.product_index, weights=gaps, minlength=table.product_count) / table.product_counts
    return float(np.mean(mean_gap))


def kendall_tau(ranked_a: ScoredProducts, ranked_b: ScoredProducts) -> float:
    """
    Tie-corrected Kendall tau (tau-b) between two scorings of the same products.
    A scoring that is constant on the compared set carries no rank information
    and yields 0.0.

    Raises:
        ProductSetMismatchError: the two lists score different products
        DataError: fewer than two products
    """
    a = _as_series(ranked_a)
    b = _as_series(ranked_b)
    if len(a) != len(b) or set(a.index) != set(b.index):
        raise ProductSetMismatchError(f"score lists cover different products ({len(a)} vs {len(b)})")
    if len(a) < 2:
        raise DataError(f"kendall tau needs at least two products, got {len(a)}")

    aligned_b = b.reindex(a.index)
    tau, _ = kendalltau(a.to_numpy(), aligned_b.to_numpy(), variant="b")
    if np.isnan(tau):
        logger.warning("Kendall tau undefined on a constant scoring, reporting 0.0", extra={"products": len(a)})
        return 0.0
    # full agreement or reversal reports exactly +-1
    if abs(abs(tau) - 1.0) < TAU_UNIT_TOLERANCE:
        return math.copysign(1.0, tau)
    return float(np.clip(tau, -1.0, 1.0))


def topk_size(threshold_pct: int, n_products: int) -> int:
    """ceil(p * M / 100), at least two and at most M."""
    size = -(-threshold_pct * n_products // 100)
    return min(n_products, max(MIN_TOPK_SIZE, size))


def topk_tau_curve(
    reference: ProductScoreTable,
    other: ProductScoreTable,
    thresholds: Sequence[int] = KENDALL_THRESHOLDS,
) -> KendallCurve:
    """
    Tau between two tables over the top p% of products by the reference score
    (ties by ascending product_id), for each threshold p.

    Raises:
        ProductSetMismatchError: the tables score different products
    """
    ref = reference.scores
    oth = other.scores
    if len(ref) != len(oth) or set(ref.index) != set(oth.index):
        raise ProductSetMismatchError(f"{reference.method} and {other.method} score different products")
    if len(ref) < MIN_TOPK_SIZE:
        raise DataError(f"top-k curves need at least {MIN_TOPK_SIZE} products, got {len(ref)}")

    product_ids = ref.index.to_numpy()
    order = np.lexsort((product_ids, -ref.to_numpy()))
    ranked_ids = product_ids[order]

    points: List[KendallPoint] = []
    for pct in thresholds:
        size = topk_size(pct, len(ranked_ids))
        subset = ranked_ids[:size]
        tau = kendall_tau(ref.loc[subset], oth.loc[subset])
        points.append(KendallPoint(threshold_pct=pct, tau=tau, set_size=size))

    return KendallCurve(reference=reference.method, other=other.method, points=points)


def rank_models(maes: Mapping[str, float]) -> List[str]:
    """Method names by ascending MAE, ties by name."""
    return sorted(maes, key=lambda name: (maes[name], name))
