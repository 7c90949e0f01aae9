"""
Shared fixtures: small hand-built rating tables and random table factories.
"""

import os
from pathlib import Path
from typing import Callable, List, Tuple

import numpy as np
import pytest

from repagg_app.app.tables import RatingTable
from repagg_app.app.tools.rating_parser import ratings_from_rows

Row = Tuple[int, int, float, int]

# consumer 1 rates everything and alone rates product 40; 2 and 3 overlap partly; 4 alone rates product 50
SMALL_ROWS: List[Row] = [
    (1, 10, 5.0, 100),
    (1, 20, 4.0, 101),
    (1, 30, 3.0, 102),
    (1, 40, 1.0, 103),
    (2, 10, 3.0, 104),
    (2, 20, 4.0, 105),
    (3, 10, 5.0, 106),
    (3, 30, 2.0, 107),
    (4, 50, 2.0, 108),
]


@pytest.fixture
def small_rows() -> List[Row]:
    return list(SMALL_ROWS)


@pytest.fixture
def small_table() -> RatingTable:
    return ratings_from_rows(SMALL_ROWS)


def make_random_rows(seed: int, n_consumers: int, n_products: int, density: float = 0.3, half_stars: bool = False) -> List[Row]:
    rng = np.random.default_rng(seed)
    levels = np.arange(1, 11) * 0.5 if half_stars else np.arange(1, 6, dtype=float)
    rows: List[Row] = []
    for consumer in range(1, n_consumers + 1):
        rated = np.flatnonzero(rng.random(n_products) < density)
        if len(rated) == 0:
            rated = np.array([rng.integers(n_products)])
        for product in rated:
            rows.append((consumer, int(product) + 1, float(rng.choice(levels)), int(rng.integers(0, 10**9))))
    return rows


@pytest.fixture
def random_table() -> Callable[..., RatingTable]:
    def factory(seed: int, n_consumers: int = 30, n_products: int = 12, **kwargs) -> RatingTable:
        return ratings_from_rows(make_random_rows(seed, n_consumers, n_products, **kwargs))

    return factory


@pytest.fixture
def write_ratings(tmp_path: Path) -> Callable[[str, str], Path]:
    """Write text to a file under tmp_path and return its path."""

    def writer(text: str, name: str = "ratings.data") -> Path:
        path = tmp_path / name
        path.write_text(text, encoding="utf-8")
        return path

    return writer


def dataset_path(variable: str) -> Path:
    return Path(os.environ.get(variable, ""))


ML100K = dataset_path("REPAGG_ML100K")
ML1M = dataset_path("REPAGG_ML1M")

requires_ml100k = pytest.mark.skipif(
    not os.environ.get("REPAGG_ML100K") or not ML100K.is_file(), reason="REPAGG_ML100K not set to u.data"
)
requires_ml1m = pytest.mark.skipif(
    not os.environ.get("REPAGG_ML1M") or not ML1M.is_file(), reason="REPAGG_ML1M not set to ratings.dat"
)
