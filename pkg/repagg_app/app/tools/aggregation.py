"""
Aggregation Tool for turning ratings into per-product reputation scores.

The weighted score is sum(w_j * r_j) / sum(w_j) over a product's raters. The
baselines (average, median, IMDb weighted rating, Bayesian average, Dirichlet
expectation) need no learned weights.
"""

import logging
from typing import Optional

import numpy as np
import pandas as pd

from repagg_app.app.config import IMDB_DEFAULT_PERCENTILE, ZERO_WEIGHT_SUM
from repagg_app.app.errors import DataError, MissingWeightError
from repagg_app.app.schemas import BaselineSpec, WeightMap
from repagg_app.app.tables import ProductScoreTable, RatingTable

logger = logging.getLogger(__name__)


def _weight_vector(table: RatingTable, weights: WeightMap) -> np.ndarray:
    """Weight per consumer position of the table."""
    missing = [int(cid) for cid in table.consumer_ids if int(cid) not in weights.weights]
    if missing:
        raise MissingWeightError(f"{len(missing)} raters have no weight (first: consumer {missing[0]})")
    return np.array([weights.weights[int(cid)] for cid in table.consumer_ids], dtype=float)


def weighted_score(table: RatingTable, weights: WeightMap, product: int) -> float:
    """
    Weighted mean of one product's ratings. Falls back to the plain mean if the
    weights sum to (numerically) zero.

    Raises:
        UnknownProductError: product has no ratings
        MissingWeightError: a rater of the product has no weight
    """
    rows = table.product_rows(product)
    raters = table.consumer_ids[table.consumer_index[rows]]
    ratings = table.ratings[rows]
    try:
        w = np.array([weights.weights[int(cid)] for cid in raters], dtype=float)
    except KeyError as e:
        raise MissingWeightError(f"consumer {e.args[0]} rated product {product} but has no weight") from None

    total = w.sum()
    if total < ZERO_WEIGHT_SUM:
        return float(ratings.mean())
    return float(np.dot(w, ratings) / total)


def score_all(table: RatingTable, weights: WeightMap, method: str = "weighted") -> ProductScoreTable:
    """Weighted score of every rated product, ascending product_id."""
    if len(table) == 0:
        raise DataError("cannot score an empty rating table")

    per_record = _weight_vector(table, weights)[table.consumer_index]
    n_products = table.product_count
    weight_sums = np.bincount(table.product_index, weights=per_record, minlength=n_products)
    weighted_sums = np.bincount(table.product_index, weights=per_record * table.ratings, minlength=n_products)

    degenerate = weight_sums < ZERO_WEIGHT_SUM
    with np.errstate(invalid="ignore", divide="ignore"):
        scores = np.where(degenerate, table.product_means, weighted_sums / np.where(degenerate, 1.0, weight_sums))
    if degenerate.any():
        logger.warning("Products with zero total weight fell back to the mean", extra={"products": int(degenerate.sum())})

    return ProductScoreTable(table.product_ids, scores, table.product_counts, method)


def resolve_baseline(table: RatingTable, spec: BaselineSpec) -> BaselineSpec:
    """Fill data-dependent defaults (IMDb m = 25th percentile of per-product counts)."""
    if spec.method == "imdb" and spec.imdb_m is None:
        m = float(np.percentile(table.product_counts, IMDB_DEFAULT_PERCENTILE))
        return spec.model_copy(update={"imdb_m": m})
    return spec


def baseline_label(spec: BaselineSpec) -> str:
    """Method name plus the parameters that shaped the scores, e.g. ``imdb[m=12]``."""
    if spec.method == "imdb":
        return f"imdb[m={spec.imdb_m:g}]" if spec.imdb_m is not None else "imdb"
    if spec.method in ("bayesian", "dirichlet"):
        return f"{spec.method}[C={spec.prior_weight:g}]"
    return spec.method


def method_name(label: str) -> str:
    """Method part of a score label: ``imdb[m=12]`` -> ``imdb``."""
    return label.split("[", 1)[0]


def _median(table: RatingTable) -> np.ndarray:
    medians = pd.Series(table.ratings).groupby(table.product_index, sort=True).median()
    return medians.to_numpy(dtype=float)


def baseline_scores(table: RatingTable, spec: BaselineSpec, label: Optional[str] = None) -> ProductScoreTable:
    """
    Score every rated product with a non-learned method.

    average    per-product mean
    median     per-product median (mean of the two middle values for even counts)
    imdb       (v/(v+m))*R + (m/(v+m))*Cg
    bayesian   (C*Cg + sum r)/(C + v)
    dirichlet  sum_x x*(c_x + C/L)/(v + C) over the L admissible levels

    Raises:
        DataError: empty table
    """
    if len(table) == 0:
        raise DataError("cannot score an empty rating table")

    spec = resolve_baseline(table, spec)
    counts = table.product_counts.astype(float)
    sums = np.bincount(table.product_index, weights=table.ratings, minlength=table.product_count)
    global_mean = float(table.ratings.mean())
    prior = spec.prior_weight

    if spec.method == "average":
        scores = np.asarray(table.product_means, dtype=float)
    elif spec.method == "median":
        scores = _median(table)
    elif spec.method == "imdb":
        m = spec.imdb_m
        scores = (counts / (counts + m)) * table.product_means + (m / (counts + m)) * global_mean
    elif spec.method == "bayesian":
        scores = (prior * global_mean + sums) / (prior + counts)
    else:
        # Uniform base rate over the admissible levels: the prior adds C * mean(levels).
        level_mean = float(np.mean(table.rating_levels))
        scores = (sums + prior * level_mean) / (counts + prior)

    name = label or baseline_label(spec)
    logger.info("Baseline scores computed", extra={"method": name, "products": table.product_count})
    return ProductScoreTable(table.product_ids, scores, table.product_counts, name)
