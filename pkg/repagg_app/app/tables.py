"""
Array-backed containers shared by the pipeline stages.

RatingTable, ProfileMatrix and ProductScoreTable hold numpy/pandas data that is
built once and only read afterwards, so they can be shared between worker threads.
"""

import logging
from typing import Iterator, List, Optional, Sequence

import numpy as np
import pandas as pd

from repagg_app.app.config import PROFILE_COLUMNS, PROFILE_FEATURES, PROFILE_TARGET, RATINGS_CSV_HEADER
from repagg_app.app.errors import UnknownConsumerError, UnknownProductError
from repagg_app.app.schemas import DatasetStats, RatingRecord, ScalingParams

logger = logging.getLogger(__name__)


def _readonly(array: np.ndarray) -> np.ndarray:
    array.flags.writeable = False
    return array


class RatingTable:
    """
    Deduplicated rating records with per-consumer and per-product indexes.

    Records are stored sorted by (consumer_id, product_id). Each record appears in
    exactly one consumer bucket (a contiguous slice) and one product bucket (a
    slice of `product_order`).
    """

    def __init__(
        self,
        frame: pd.DataFrame,
        rating_levels: Sequence[float],
        duplicates_removed: int = 0,
    ):
        """
        Build the indexes. Use `from_frame` for raw input that may hold duplicates.

        Args:
            frame: Records with the four RATINGS_CSV_HEADER columns, unique per pair
            rating_levels: Admissible rating levels, ascending
            duplicates_removed: Count of duplicate pairs dropped before construction
        """
        frame = frame[RATINGS_CSV_HEADER].sort_values(
            ["consumer_id", "product_id"], kind="mergesort"
        ).reset_index(drop=True)
        frame = frame.astype({"consumer_id": "int64", "product_id": "int64", "rating": "float64", "timestamp": "int64"})
        self._frame = frame
        self.rating_levels: List[float] = [float(v) for v in sorted(rating_levels)]
        self.duplicates_removed = int(duplicates_removed)

        consumers = frame["consumer_id"].to_numpy()
        products = frame["product_id"].to_numpy()
        ratings = frame["rating"].to_numpy()

        self.consumer_ids, consumer_index = np.unique(consumers, return_inverse=True)
        self.product_ids, product_index = np.unique(products, return_inverse=True)
        self.consumer_index = _readonly(consumer_index.astype(np.int64))
        self.product_index = _readonly(product_index.astype(np.int64))
        self.ratings = _readonly(ratings)
        _readonly(self.consumer_ids)
        _readonly(self.product_ids)

        n_consumers = len(self.consumer_ids)
        n_products = len(self.product_ids)

        self.consumer_counts = _readonly(np.bincount(self.consumer_index, minlength=n_consumers))
        self.consumer_offsets = _readonly(np.concatenate(([0], np.cumsum(self.consumer_counts))))

        self.product_counts = _readonly(np.bincount(self.product_index, minlength=n_products))
        self.product_offsets = _readonly(np.concatenate(([0], np.cumsum(self.product_counts))))
        self.product_order = _readonly(np.argsort(self.product_index, kind="stable"))

        sums = np.bincount(self.product_index, weights=ratings, minlength=n_products)
        with np.errstate(invalid="ignore", divide="ignore"):
            self.product_means = _readonly(sums / self.product_counts)

        # Histogram bins: admissible levels plus any off-level value actually present.
        self.histogram_levels = _readonly(np.union1d(np.asarray(self.rating_levels, dtype=float), np.unique(ratings)))
        self.level_index = _readonly(np.searchsorted(self.histogram_levels, ratings))
        n_levels = len(self.histogram_levels)
        flat = np.bincount(self.product_index * n_levels + self.level_index, minlength=n_products * n_levels)
        self.histograms = _readonly(flat.reshape(n_products, n_levels))

    @classmethod
    def from_frame(cls, frame: pd.DataFrame, rating_levels: Sequence[float]) -> "RatingTable":
        """
        Build a table from raw records, keeping the latest record of every
        (consumer, product) pair. Equal timestamps keep the higher rating.
        """
        ordered = frame[RATINGS_CSV_HEADER].sort_values(
            ["consumer_id", "product_id", "timestamp", "rating"], kind="mergesort"
        )
        duplicated = ordered.duplicated(["consumer_id", "product_id"], keep="last")
        removed = int(duplicated.sum())
        if removed:
            logger.info("Removed duplicate ratings", extra={"duplicates_removed": removed})
        return cls(ordered[~duplicated], rating_levels, duplicates_removed=removed)

    @classmethod
    def empty(cls, rating_levels: Sequence[float]) -> "RatingTable":
        frame = pd.DataFrame({name: pd.Series(dtype="int64") for name in RATINGS_CSV_HEADER})
        return cls(frame.astype({"rating": "float64"}), rating_levels)

    # Size

    def __len__(self) -> int:
        return len(self._frame)

    @property
    def consumer_count(self) -> int:
        return len(self.consumer_ids)

    @property
    def product_count(self) -> int:
        return len(self.product_ids)

    def stats(self) -> DatasetStats:
        return DatasetStats(
            consumer_count=self.consumer_count,
            product_count=self.product_count,
            rating_count=len(self),
        )

    @property
    def rating_step(self) -> float:
        levels = self.rating_levels
        return float(min(np.diff(levels))) if len(levels) > 1 else 1.0

    # Lookups

    def consumer_position(self, consumer_id: int) -> int:
        pos = int(np.searchsorted(self.consumer_ids, consumer_id))
        if pos >= len(self.consumer_ids) or self.consumer_ids[pos] != consumer_id:
            raise UnknownConsumerError(consumer_id)
        return pos

    def product_position(self, product_id: int) -> int:
        pos = int(np.searchsorted(self.product_ids, product_id))
        if pos >= len(self.product_ids) or self.product_ids[pos] != product_id:
            raise UnknownProductError(product_id)
        return pos

    def consumer_rows(self, consumer_id: int) -> np.ndarray:
        """Record row numbers of one consumer (contiguous, by product_id)."""
        pos = self.consumer_position(consumer_id)
        return np.arange(self.consumer_offsets[pos], self.consumer_offsets[pos + 1])

    def product_rows(self, product_id: int) -> np.ndarray:
        """Record row numbers of one product, ordered by consumer_id."""
        pos = self.product_position(product_id)
        return self.product_order[self.product_offsets[pos]:self.product_offsets[pos + 1]]

    def by_consumer(self, consumer_id: int) -> pd.DataFrame:
        return self._frame.iloc[self.consumer_rows(consumer_id)]

    def by_product(self, product_id: int) -> pd.DataFrame:
        return self._frame.iloc[self.product_rows(product_id)]

    @property
    def product_mean(self) -> pd.Series:
        """product_id -> arithmetic mean of its ratings."""
        return pd.Series(self.product_means, index=pd.Index(self.product_ids, name="product_id"), name="mean")

    @property
    def product_histogram(self) -> pd.DataFrame:
        """product_id x rating level -> count."""
        return pd.DataFrame(
            self.histograms,
            index=pd.Index(self.product_ids, name="product_id"),
            columns=[float(v) for v in self.histogram_levels],
        )

    # Export

    def to_frame(self) -> pd.DataFrame:
        return self._frame.copy()

    def records(self) -> Iterator[RatingRecord]:
        for row in self._frame.itertuples(index=False):
            yield RatingRecord(
                consumer_id=int(row.consumer_id),
                product_id=int(row.product_id),
                rating=float(row.rating),
                timestamp=int(row.timestamp),
            )

    def equals(self, other: "RatingTable") -> bool:
        return self.rating_levels == other.rating_levels and self._frame.equals(other._frame)


class ProfileMatrix:
    """
    Consumer profiles as a raw and a Min-Max-scaled matrix, rows by ascending consumer_id.
    Columns follow PROFILE_COLUMNS: the five inputs then the reliability target.
    """

    feature_names: List[str] = PROFILE_FEATURES
    target_name: str = PROFILE_TARGET

    def __init__(
        self,
        consumer_ids: np.ndarray,
        raw: np.ndarray,
        scaled: np.ndarray,
        scaling: ScalingParams,
        log_counts: bool = False,
    ):
        self.consumer_ids = _readonly(np.asarray(consumer_ids, dtype=np.int64))
        self.raw = _readonly(np.asarray(raw, dtype=float))
        self.scaled = _readonly(np.asarray(scaled, dtype=float))
        self.scaling = scaling
        self.log_counts = log_counts

    def __len__(self) -> int:
        return len(self.consumer_ids)

    @property
    def X(self) -> np.ndarray:
        return self.scaled[:, : len(self.feature_names)]

    @property
    def y(self) -> np.ndarray:
        return self.scaled[:, len(self.feature_names)]

    def to_frame(self, scaled: bool = True) -> pd.DataFrame:
        frame = pd.DataFrame(self.scaled if scaled else self.raw, columns=PROFILE_COLUMNS)
        frame.insert(0, "consumer_id", self.consumer_ids)
        return frame


class ProductScoreTable:
    """
    Reputation score and rating count per product, ordered by product_id.
    """

    def __init__(self, product_ids: np.ndarray, scores: np.ndarray, n_ratings: np.ndarray, method: str):
        order = np.argsort(np.asarray(product_ids), kind="stable")
        self.frame = pd.DataFrame(
            {
                "score": np.asarray(scores, dtype=float)[order],
                "n_ratings": np.asarray(n_ratings, dtype=np.int64)[order],
            },
            index=pd.Index(np.asarray(product_ids, dtype=np.int64)[order], name="product_id"),
        )
        self.method = method

    def __len__(self) -> int:
        return len(self.frame)

    @property
    def scores(self) -> pd.Series:
        return self.frame["score"].rename(self.method)

    @property
    def product_ids(self) -> np.ndarray:
        return self.frame.index.to_numpy()

    def score_of(self, product_id: int) -> float:
        try:
            return float(self.frame.at[product_id, "score"])
        except KeyError:
            raise UnknownProductError(product_id) from None

    def relabel(self, method: str) -> "ProductScoreTable":
        return ProductScoreTable(self.product_ids, self.frame["score"].to_numpy(), self.frame["n_ratings"].to_numpy(), method)

    def to_frame(self) -> pd.DataFrame:
        frame = self.frame.reset_index()
        frame["method"] = self.method
        return frame


def scores_from_frame(frame: pd.DataFrame, method: Optional[str] = None) -> ProductScoreTable:
    """Rebuild a score table from a `product_id,score,n_ratings,method` frame."""
    label = method or (str(frame["method"].iloc[0]) if len(frame) else "unknown")
    return ProductScoreTable(
        frame["product_id"].to_numpy(), frame["score"].to_numpy(), frame["n_ratings"].to_numpy(), label
    )
