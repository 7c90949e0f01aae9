"""
Tests for the aggregation tool: weighted scores and the non-learned baselines.
"""

import numpy as np
import pytest

from repagg_app.app.errors import MissingWeightError, UnknownProductError
from repagg_app.app.schemas import BaselineSpec, WeightMap
from repagg_app.app.tools.aggregation import (
    baseline_label,
    baseline_scores,
    method_name,
    resolve_baseline,
    score_all,
    weighted_score,
)
from repagg_app.app.tools.rating_parser import ratings_from_rows


def _weights(mapping):
    return WeightMap(weights=mapping, predicted={cid: 0.0 for cid in mapping}, floor=0.01)


@pytest.fixture
def two_raters():
    return ratings_from_rows([(1, 1, 5.0, 1), (2, 1, 3.0, 2)])


class TestWeightedScore:
    """Test suite for the weighted mean of one product."""

    def test_equal_weights_give_mean(self, two_raters):
        """Weights {1, 1} over ratings {5, 3} give 4."""
        assert weighted_score(two_raters, _weights({1: 1.0, 2: 1.0}), 1) == 4.0

    def test_unequal_weights(self, two_raters):
        """Weights {3, 1} give (15 + 3) / 4."""
        weights = WeightMap.model_construct(weights={1: 3.0, 2: 1.0}, predicted={1: 0.0, 2: 0.0})
        assert weighted_score(two_raters, weights, 1) == pytest.approx(4.5, abs=1e-12)

    def test_single_rating(self):
        """One rating is its own score."""
        table = ratings_from_rows([(1, 1, 2.0, 1)])
        assert weighted_score(table, _weights({1: 0.3}), 1) == 2.0

    def test_zero_weight_sum_falls_back_to_mean(self, two_raters):
        """Vanishing weights fall back to the arithmetic mean."""
        weights = WeightMap.model_construct(weights={1: 0.0, 2: 0.0}, predicted={1: 1.0, 2: 1.0})
        assert weighted_score(two_raters, weights, 1) == 4.0

    def test_unknown_product(self, two_raters):
        """Scoring an unrated product is a lookup error."""
        with pytest.raises(UnknownProductError):
            weighted_score(two_raters, _weights({1: 1.0, 2: 1.0}), 9)

    def test_missing_weight(self, two_raters):
        """Every rater needs a weight."""
        with pytest.raises(MissingWeightError):
            weighted_score(two_raters, _weights({1: 1.0}), 1)


class TestScoreAll:
    """Test suite for scoring every product."""

    def test_matches_single_product_scores(self, small_table):
        """The vectorised pass agrees with weighted_score per product."""
        weights = _weights({1: 0.9, 2: 0.2, 3: 0.5, 4: 1.0})
        scores = score_all(small_table, weights)

        assert scores.product_ids.tolist() == [10, 20, 30, 40, 50]
        for product_id in scores.product_ids:
            assert scores.score_of(product_id) == pytest.approx(
                weighted_score(small_table, weights, int(product_id)), abs=1e-12
            )

    def test_equal_weights_equal_average(self, random_table):
        """Uniform weights reproduce the average baseline."""
        table = random_table(41)
        uniform = score_all(table, WeightMap.uniform(table.consumer_ids.tolist(), 0.37))
        average = baseline_scores(table, BaselineSpec(method="average"))
        assert np.max(np.abs(uniform.scores.to_numpy() - average.scores.to_numpy())) < 1e-12

    def test_scale_equivariance(self, random_table):
        """Multiplying every weight by a constant leaves scores unchanged."""
        table = random_table(42)
        rng = np.random.default_rng(0)
        base = {int(c): float(rng.uniform(0.05, 0.5)) for c in table.consumer_ids}
        doubled = {c: 2.0 * w for c, w in base.items()}
        first = score_all(table, _weights(base)).scores.to_numpy()
        second = score_all(table, _weights(doubled)).scores.to_numpy()
        assert np.max(np.abs(first - second)) < 1e-12

    def test_scores_within_product_rating_range(self, random_table):
        """Each weighted score lies between the product's lowest and highest rating."""
        table = random_table(43)
        rng = np.random.default_rng(1)
        weights = _weights({int(c): float(rng.uniform(0.01, 1.0)) for c in table.consumer_ids})
        scores = score_all(table, weights)
        frame = table.to_frame()
        for product_id, group in frame.groupby("product_id"):
            score = scores.score_of(product_id)
            assert group["rating"].min() - 1e-12 <= score <= group["rating"].max() + 1e-12

    def test_raising_top_rater_weight_never_lowers_score(self, small_table):
        """Product 10's highest raters are consumers 1 and 3."""
        low = score_all(small_table, _weights({1: 0.2, 2: 0.5, 3: 0.5, 4: 0.5})).score_of(10)
        high = score_all(small_table, _weights({1: 0.9, 2: 0.5, 3: 0.5, 4: 0.5})).score_of(10)
        assert high >= low

    def test_missing_weight(self, small_table):
        """A consumer without weight stops scoring."""
        with pytest.raises(MissingWeightError):
            score_all(small_table, _weights({1: 1.0, 2: 1.0}))

    def test_hand_built_table(self):
        """Three products checked against hand evaluation."""
        table = ratings_from_rows(
            [(1, 1, 5.0, 1), (2, 1, 1.0, 2), (1, 2, 4.0, 3), (3, 2, 2.0, 4), (2, 3, 3.0, 5)]
        )
        scores = score_all(table, _weights({1: 1.0, 2: 0.5, 3: 0.25}))

        assert scores.score_of(1) == pytest.approx((5.0 + 0.5) / 1.5, abs=1e-12)
        assert scores.score_of(2) == pytest.approx((4.0 + 0.5) / 1.25, abs=1e-12)
        assert scores.score_of(3) == 3.0
        assert scores.frame["n_ratings"].tolist() == [2, 2, 1]


class TestBaselines:
    """Test suite for the non-learned aggregation methods."""

    def test_average(self, two_raters):
        """Mean of {5, 3}."""
        assert baseline_scores(two_raters, BaselineSpec(method="average")).score_of(1) == 4.0

    def test_median_odd_and_even(self):
        """Middle value for odd counts, mean of the two middle values for even counts."""
        table = ratings_from_rows(
            [(1, 1, 1.0, 1), (2, 1, 2.0, 2), (3, 1, 5.0, 3), (1, 2, 1.0, 4), (2, 2, 4.0, 5)]
        )
        scores = baseline_scores(table, BaselineSpec(method="median"))

        assert scores.score_of(1) == 2.0
        assert scores.score_of(2) == 2.5

    def test_imdb_by_hand(self):
        """(2/4)*5 + (2/4)*3 with m = 2 and a global mean of 3."""
        table = ratings_from_rows([(1, 1, 5.0, 1), (2, 1, 5.0, 2), (1, 2, 1.0, 3), (2, 2, 1.0, 4)])
        scores = baseline_scores(table, BaselineSpec(method="imdb", imdb_m=2))

        assert scores.score_of(1) == pytest.approx(4.0, abs=1e-12)
        assert scores.method == "imdb[m=2]"

    def test_imdb_default_m_is_count_quartile(self, random_table):
        """Without m the 25th percentile of per-product counts is used."""
        table = random_table(44)
        resolved = resolve_baseline(table, BaselineSpec(method="imdb"))
        assert resolved.imdb_m == pytest.approx(float(np.percentile(table.product_counts, 25)))

    def test_bayesian_by_hand(self):
        """(C*Cg + sum) / (C + v)."""
        table = ratings_from_rows([(1, 1, 5.0, 1), (2, 1, 5.0, 2), (1, 2, 1.0, 3), (2, 2, 1.0, 4)])
        scores = baseline_scores(table, BaselineSpec(method="bayesian", prior_weight=2.0))
        assert scores.score_of(1) == pytest.approx((2.0 * 3.0 + 10.0) / 4.0, abs=1e-12)

    def test_dirichlet_by_hand(self):
        """Uniform prior over five levels with C = 2 pulls toward 3."""
        table = ratings_from_rows([(1, 1, 5.0, 1), (2, 1, 5.0, 2)])
        scores = baseline_scores(table, BaselineSpec(method="dirichlet", prior_weight=2.0))
        assert scores.score_of(1) == pytest.approx((10.0 + 2.0 * 3.0) / 4.0, abs=1e-12)

    @pytest.mark.parametrize("spec", [BaselineSpec(method="dirichlet", prior_weight=0.0), BaselineSpec(method="imdb", imdb_m=0.0)])
    def test_degenerate_priors_equal_average(self, random_table, spec):
        """C = 0 (dirichlet) and m = 0 (imdb) reduce to the average."""
        table = random_table(45)
        average = baseline_scores(table, BaselineSpec(method="average")).scores.to_numpy()
        other = baseline_scores(table, spec).scores.to_numpy()
        assert np.max(np.abs(average - other)) < 1e-12

    @pytest.mark.parametrize("method", ["average", "median", "imdb", "bayesian", "dirichlet"])
    def test_scores_within_rating_levels(self, random_table, method):
        """Every baseline score lies within the admissible level range."""
        table = random_table(46, half_stars=True)
        scores = baseline_scores(table, BaselineSpec(method=method)).scores.to_numpy()
        assert scores.min() >= min(table.rating_levels) and scores.max() <= max(table.rating_levels)

    def test_unknown_method(self):
        """Only the five baselines exist."""
        with pytest.raises(ValueError):
            BaselineSpec(method="fuzzy")

    def test_labels(self):
        """Labels carry the parameters; method_name strips them."""
        assert baseline_label(BaselineSpec(method="bayesian", prior_weight=2.0)) == "bayesian[C=2]"
        assert baseline_label(BaselineSpec(method="median")) == "median"
        assert method_name("imdb[m=12.5]") == "imdb"
