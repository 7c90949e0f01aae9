"""
Profile Feature Tool for extracting the six consumer-profile variables from a
RatingTable and Min-Max-scaling them into the learning matrix.

Variables per consumer i:
  pos, nut, ngv  counts of positive (>= 3.5), neutral, negative (<= 2.5) ratings
  exp            |u_i| / max_j |u_j|
  fluc           mean over co-rated products of the mean of lambda^|r_ik - r_jk| over other raters j
  rel            mean over rated products of |r_ik - mean_k|
"""

import logging
from typing import List, Sequence, Tuple

import numpy as np

from repagg_app.app.config import COUNT_FEATURES, FLUCTUATION_FLOOR, NEGATIVE_MAX, POSITIVE_MIN, PROFILE_COLUMNS
from repagg_app.app.errors import DataError
from repagg_app.app.schemas import ConsumerProfile, LambdaConfig, ScalingParams
from repagg_app.app.tables import ProfileMatrix, RatingTable

logger = logging.getLogger(__name__)


def _discount_matrix(levels: np.ndarray, cfg: LambdaConfig) -> np.ndarray:
    """D[a, b] = lambda^|level_a - level_b|."""
    return cfg.fading ** np.abs(levels[:, None] - levels[None, :])


def _agreement(table: RatingTable, rows: np.ndarray, discount: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Mean agreement with the other raters of each record's product, from the histogram:
    (sum_v h_k[v] * lambda^|r - v| - 1) / (n_k - 1).

    Returns:
        (values, qualifies) where qualifies marks products with at least one other rater
    """
    products = table.product_index[rows]
    levels = table.level_index[rows]
    n = table.product_counts[products]
    qualifies = n > 1
    # per_level[k, l] = sum_v h_k[v] * lambda^|level_l - v|; O(products x levels^2) once.
    per_level = table.histograms @ discount.T
    weighted = per_level[products, levels]
    with np.errstate(invalid="ignore", divide="ignore"):
        values = np.where(qualifies, (weighted - 1.0) / np.maximum(n - 1, 1), 0.0)
    return values, qualifies


def tendency_counts(table: RatingTable, consumer: int) -> Tuple[int, int, int]:
    """
    Count a consumer's positive, neutral and negative ratings.

    Raises:
        UnknownConsumerError: consumer has no ratings in the table
    """
    ratings = table.ratings[table.consumer_rows(consumer)]
    pos = int(np.count_nonzero(ratings >= POSITIVE_MIN))
    ngv = int(np.count_nonzero(ratings <= NEGATIVE_MAX))
    return pos, len(ratings) - pos - ngv, ngv


def fluctuation(table: RatingTable, consumer: int, cfg: LambdaConfig = LambdaConfig()) -> float:
    """
    Agreement of a consumer with co-raters. The consumer is excluded from each
    product's raters; products without another rater are skipped, and a consumer
    with no such product gets 1.0.
    """
    rows = table.consumer_rows(consumer)
    values, qualifies = _agreement(table, rows, _discount_matrix(table.histogram_levels, cfg))
    if not qualifies.any():
        return 1.0
    return float(np.clip(np.mean(values[qualifies]), FLUCTUATION_FLOOR, 1.0))


def experience(table: RatingTable, consumer: int) -> float:
    """Rating count relative to the most prolific consumer."""
    position = table.consumer_position(consumer)
    return float(table.consumer_counts[position] / table.consumer_counts.max())


def reliability(table: RatingTable, consumer: int) -> float:
    """Mean absolute gap between the consumer's ratings and the product means (own rating included)."""
    rows = table.consumer_rows(consumer)
    gaps = np.abs(table.ratings[rows] - table.product_means[table.product_index[rows]])
    return float(np.mean(gaps))


def profile_arrays(table: RatingTable, cfg: LambdaConfig = LambdaConfig()) -> Tuple[np.ndarray, np.ndarray]:
    """
    Extract all six variables for every consumer in one vectorized pass.

    Returns:
        (consumer_ids ascending, raw matrix with PROFILE_COLUMNS columns)
    """
    if len(table) == 0:
        raise DataError("cannot build profiles from an empty rating table")

    n_consumers = table.consumer_count
    consumer_index = table.consumer_index
    ratings = table.ratings
    counts = table.consumer_counts

    pos = np.bincount(consumer_index, weights=ratings >= POSITIVE_MIN, minlength=n_consumers)
    ngv = np.bincount(consumer_index, weights=ratings <= NEGATIVE_MAX, minlength=n_consumers)
    nut = counts - pos - ngv

    exp = counts / counts.max()

    all_rows = np.arange(len(table))
    values, qualifies = _agreement(table, all_rows, _discount_matrix(table.histogram_levels, cfg))
    agreement_sum = np.bincount(consumer_index[qualifies], weights=values[qualifies], minlength=n_consumers)
    agreement_count = np.bincount(consumer_index[qualifies], minlength=n_consumers)
    with np.errstate(invalid="ignore", divide="ignore"):
        fluc = np.where(agreement_count > 0, agreement_sum / np.maximum(agreement_count, 1), 1.0)
    fluc = np.clip(fluc, FLUCTUATION_FLOOR, 1.0)

    gaps = np.abs(ratings - table.product_means[table.product_index])
    rel = np.bincount(consumer_index, weights=gaps, minlength=n_consumers) / counts

    raw = np.column_stack([pos, nut, ngv, exp, fluc, rel]).astype(float)
    logger.info(
        "Extracted consumer profiles",
        extra={"consumers": n_consumers, "lambda": cfg.fading, "without_co_raters": int((agreement_count == 0).sum())},
    )
    return np.asarray(table.consumer_ids, dtype=np.int64), raw


def build_profiles(table: RatingTable, cfg: LambdaConfig = LambdaConfig()) -> List[ConsumerProfile]:
    """One ConsumerProfile per consumer, ascending consumer_id."""
    consumer_ids, raw = profile_arrays(table, cfg)
    return [
        ConsumerProfile(
            consumer_id=int(cid),
            pos=int(row[0]),
            nut=int(row[1]),
            ngv=int(row[2]),
            exp=float(row[3]),
            fluc=float(row[4]),
            rel=float(row[5]),
        )
        for cid, row in zip(consumer_ids, raw)
    ]


def fit_scaling(raw: np.ndarray, columns: Sequence[str] = PROFILE_COLUMNS) -> ScalingParams:
    """Per-column (min, max) over the given rows."""
    if len(raw) == 0:
        raise DataError("cannot fit scaling on zero profiles")
    low = np.min(raw, axis=0)
    high = np.max(raw, axis=0)
    return ScalingParams(bounds={name: (float(a), float(b)) for name, a, b in zip(columns, low, high)})


def log_transform_counts(raw: np.ndarray) -> np.ndarray:
    """log(1 + v) on the pos/nut/ngv columns."""
    transformed = np.array(raw, dtype=float, copy=True)
    for name in COUNT_FEATURES:
        column = PROFILE_COLUMNS.index(name)
        transformed[:, column] = np.log1p(transformed[:, column])
    return transformed


def scale_matrix(consumer_ids: np.ndarray, raw: np.ndarray, log_counts: bool = False) -> ProfileMatrix:
    """Min-Max-scale a raw profile matrix using its own extrema."""
    if log_counts:
        raw = log_transform_counts(raw)
    scaling = fit_scaling(raw)
    return ProfileMatrix(consumer_ids, raw, scaling.transform(raw), scaling, log_counts=log_counts)


def minmax_scale(profiles: Sequence[ConsumerProfile], log_counts: bool = False) -> ProfileMatrix:
    """
    Map every variable to (v - min) / (max - min) over the collection. A constant
    variable maps to 0.0 everywhere.

    Raises:
        DataError: empty collection
    """
    if not profiles:
        raise DataError("cannot scale an empty profile collection")
    ordered = sorted(profiles, key=lambda p: p.consumer_id)
    consumer_ids = np.array([p.consumer_id for p in ordered], dtype=np.int64)
    raw = np.array([p.values() for p in ordered], dtype=float)
    return scale_matrix(consumer_ids, raw, log_counts=log_counts)


def unscale(matrix: ProfileMatrix) -> np.ndarray:
    """Recover the raw (pre-scaling) values from a matrix's ScalingParams."""
    return matrix.scaling.inverse(matrix.scaled)
