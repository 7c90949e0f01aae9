"""
Tests for the metrics tool: MAE, Kendall tau-b, top-k curves and rankings.
"""

import numpy as np
import pandas as pd
import pytest

from repagg_app.app.config import KENDALL_THRESHOLDS
from repagg_app.app.errors import DataError, MissingScoreError, ProductSetMismatchError
from repagg_app.app.schemas import BaselineSpec
from repagg_app.app.tables import ProductScoreTable
from repagg_app.app.tools.aggregation import baseline_scores
from repagg_app.app.tools.metrics import kendall_tau, mae, rank_models, topk_size, topk_tau_curve
from repagg_app.app.tools.rating_parser import ratings_from_rows


def _scores(mapping, method="test"):
    ids = np.array(sorted(mapping))
    return ProductScoreTable(ids, np.array([mapping[i] for i in ids]), np.ones(len(ids)), method)


def _rated_around_quality(seed, n_consumers, n_products):
    """Rows where each product has its own quality and consumers rate near it."""
    rng = np.random.default_rng(seed)
    quality = rng.uniform(1.0, 5.0, n_products)
    rows = []
    for consumer in range(1, n_consumers + 1):
        for product in np.flatnonzero(rng.random(n_products) < 0.4):
            rating = float(np.clip(np.rint(quality[product] + rng.normal(0.0, 0.7)), 1, 5))
            rows.append((consumer, int(product) + 1, rating, int(rng.integers(0, 10**9))))
    return rows


class TestMae:
    """Test suite for the rating-level mean absolute error."""

    def test_hand_evaluated(self):
        """Ratings {5, 3} scored 4 and rating {2} scored 2.0 average to (1 + 0) / 2."""
        table = ratings_from_rows([(1, 1, 5.0, 1), (2, 1, 3.0, 2), (1, 2, 2.0, 3)])
        assert mae(table, _scores({1: 4.0, 2: 2.0})) == pytest.approx(0.5, abs=1e-12)

    def test_mixed_gaps(self):
        """Ratings {4, 5, 5} scored at their mean give mean gap 4/9 on product 1; product 2 adds 1."""
        table = ratings_from_rows([(1, 1, 4.0, 1), (2, 1, 5.0, 2), (3, 1, 5.0, 3), (1, 2, 3.0, 4)])
        scores = _scores({1: 14.0 / 3.0, 2: 4.0})
        assert mae(table, scores) == pytest.approx((4.0 / 9.0 + 1.0) / 2.0, abs=1e-12)

    def test_perfect_scores(self):
        """Every product rated unanimously and scored exactly has zero error."""
        table = ratings_from_rows([(1, 1, 4.0, 1), (2, 1, 4.0, 2), (1, 2, 2.0, 3)])
        assert mae(table, _scores({1: 4.0, 2: 2.0})) == 0.0

    def test_products_weigh_equally(self):
        """A heavily rated product counts once, like a singly rated one."""
        rows = [(c, 1, 5.0, c) for c in range(1, 11)] + [(1, 2, 1.0, 20)]
        table = ratings_from_rows(rows)
        assert mae(table, _scores({1: 5.0, 2: 3.0})) == pytest.approx(1.0, abs=1e-12)

    def test_missing_score(self, small_table):
        """A rated product without a score is an error."""
        with pytest.raises(MissingScoreError):
            mae(small_table, _scores({10: 4.0, 20: 4.0}))

    def test_extra_scores_are_ignored(self):
        """Scores for unrated products do not enter the error."""
        table = ratings_from_rows([(1, 1, 5.0, 1)])
        assert mae(table, _scores({1: 5.0, 99: 1.0})) == 0.0

    @pytest.mark.parametrize("seed", range(5))
    def test_product_means_beat_constant_scores(self, seed):
        """Scoring every product at its mean rating never loses to a constant 1, 3 or 5."""
        table = ratings_from_rows(_rated_around_quality(seed, n_consumers=80, n_products=25))
        mean_mae = mae(table, baseline_scores(table, BaselineSpec(method="average")))

        for constant in (1.0, 3.0, 5.0):
            flat = _scores({int(p): constant for p in table.product_ids})
            assert mean_mae <= mae(table, flat)

    def test_record_order_does_not_matter(self, small_rows):
        """Shuffled input gives the same MAE."""
        forward = ratings_from_rows(small_rows)
        backward = ratings_from_rows(list(reversed(small_rows)))
        scores = baseline_scores(forward, BaselineSpec(method="median"))
        assert mae(forward, scores) == mae(backward, scores)


class TestKendallTau:
    """Test suite for tau-b between two scorings."""

    def test_identical(self):
        """A ranking agrees perfectly with itself."""
        scores = {1: 0.3, 2: 0.9, 3: 0.5, 4: 0.1}
        assert kendall_tau(scores, scores) == 1.0

    def test_reversed(self):
        """A reversed ranking gives -1."""
        assert kendall_tau({1: 1.0, 2: 2.0, 3: 3.0}, {1: 3.0, 2: 2.0, 3: 1.0}) == -1.0

    @pytest.mark.parametrize("n", [2, 20, 50, 173, 1682])
    def test_agreement_and_reversal_are_exact(self, n):
        """Self comparison is exactly 1 and a full reversal exactly -1, at any size."""
        rng = np.random.default_rng(n)
        scores = dict(zip(range(1, n + 1), rng.random(n)))
        reversed_scores = {k: -v for k, v in scores.items()}

        assert kendall_tau(scores, scores) == 1.0
        assert kendall_tau(scores, reversed_scores) == -1.0

    def test_one_swap_of_four(self):
        """(1,2,3,4) vs (1,3,2,4): five concordant, one discordant pair."""
        a = {10: 1.0, 20: 2.0, 30: 3.0, 40: 4.0}
        b = {10: 1.0, 20: 3.0, 30: 2.0, 40: 4.0}
        assert kendall_tau(a, b) == pytest.approx(4.0 / 6.0, abs=1e-12)

    def test_ties_use_tau_b(self):
        """Ties in one list shrink the denominator as tau-b prescribes."""
        a = {1: 1.0, 2: 2.0, 3: 3.0}
        b = {1: 1.0, 2: 1.0, 3: 2.0}
        # concordant 2, discordant 0, one tie in b: 2 / sqrt(3 * 2)
        assert kendall_tau(a, b) == pytest.approx(2.0 / np.sqrt(6.0), abs=1e-12)

    def test_symmetric(self):
        """tau(a, b) == tau(b, a)."""
        rng = np.random.default_rng(0)
        a = dict(zip(range(1, 31), rng.random(30)))
        b = dict(zip(range(1, 31), rng.random(30)))
        assert kendall_tau(a, b) == pytest.approx(kendall_tau(b, a), abs=1e-12)

    def test_invariant_to_monotone_transform(self):
        """Only the order of scores matters."""
        rng = np.random.default_rng(1)
        a = dict(zip(range(1, 41), rng.random(40)))
        b = dict(zip(range(1, 41), rng.random(40)))
        stretched = {k: np.exp(3.0 * v) + 7.0 for k, v in b.items()}
        assert kendall_tau(a, b) == pytest.approx(kendall_tau(a, stretched), abs=1e-12)

    def test_alignment_by_product_id(self):
        """Series in different index order are aligned before comparison."""
        a = pd.Series([0.1, 0.2, 0.3], index=[1, 2, 3])
        b = pd.Series([0.3, 0.1, 0.2], index=[3, 1, 2])
        assert kendall_tau(a, b) == 1.0

    def test_accepts_score_tables(self):
        """ProductScoreTable inputs work like mappings."""
        scores = _scores({1: 2.0, 2: 1.0, 3: 3.0})
        assert kendall_tau(scores, scores) == 1.0

    def test_constant_scoring_reports_zero(self):
        """A constant list carries no order; tau is reported as 0."""
        assert kendall_tau({1: 1.0, 2: 2.0, 3: 3.0}, {1: 4.0, 2: 4.0, 3: 4.0}) == 0.0

    def test_mismatched_products(self):
        """Both lists must score the same products."""
        with pytest.raises(ProductSetMismatchError):
            kendall_tau({1: 1.0, 2: 2.0}, {1: 1.0, 3: 2.0})

    def test_too_few_products(self):
        """One product cannot be ranked."""
        with pytest.raises(DataError):
            kendall_tau({1: 1.0}, {1: 2.0})


class TestTopKCurve:
    """Test suite for tau over the top p% of products."""

    @pytest.mark.parametrize(
        "pct, n, expected",
        [(1, 1682, 17), (10, 1682, 169), (100, 1682, 1682), (1, 20, 2), (10, 20, 2), (50, 3, 2), (30, 7, 3)],
    )
    def test_subset_size(self, pct, n, expected):
        """ceil(p * M / 100), never below two nor above M."""
        assert topk_size(pct, n) == expected

    def test_self_curve_is_all_ones(self):
        """A table compared with itself has tau 1 at every threshold."""
        rng = np.random.default_rng(2)
        scores = _scores(dict(zip(range(1, 51), rng.random(50))))
        curve = topk_tau_curve(scores, scores)

        assert [p.threshold_pct for p in curve.points] == KENDALL_THRESHOLDS
        assert all(p.tau == 1.0 for p in curve.points)

    def test_reversed_curve_is_all_minus_one(self):
        """Twenty products in opposite order disagree at every threshold."""
        ids = range(1, 21)
        forward = _scores({i: float(i) for i in ids}, "forward")
        backward = _scores({i: float(-i) for i in ids}, "backward")
        curve = topk_tau_curve(forward, backward)

        assert all(p.tau == -1.0 for p in curve.points)
        assert (curve.reference, curve.other) == ("forward", "backward")

    def test_full_threshold_equals_kendall_tau(self):
        """The 100% point is the plain tau over all products."""
        rng = np.random.default_rng(3)
        a = _scores(dict(zip(range(1, 61), rng.random(60))))
        b = _scores(dict(zip(range(1, 61), rng.random(60))))
        curve = topk_tau_curve(a, b)

        assert curve.points[-1].set_size == 60
        assert curve.points[-1].tau == pytest.approx(kendall_tau(a, b), abs=1e-12)

    def test_subset_follows_reference_order(self):
        """The top slice is chosen by the reference scores, ties by product id."""
        reference = _scores({1: 5.0, 2: 5.0, 3: 1.0, 4: 0.0})
        other = _scores({1: 1.0, 2: 2.0, 3: 9.0, 4: 8.0})
        curve = topk_tau_curve(reference, other, thresholds=[50])

        # top two by reference are products 1 and 2, tied in the reference
        assert curve.points[0].set_size == 2
        assert curve.points[0].tau == 0.0

    def test_mismatched_tables(self):
        """Curves need the same products on both sides."""
        with pytest.raises(ProductSetMismatchError):
            topk_tau_curve(_scores({1: 1.0, 2: 2.0}), _scores({1: 1.0, 3: 2.0}))


class TestRankModels:
    """Test suite for MAE ranking."""

    def test_ascending_mae(self):
        """Lowest MAE first."""
        assert rank_models({"average": 0.8, "SVR": 0.6, "LR": 0.7}) == ["SVR", "LR", "average"]

    def test_ties_by_name(self):
        """Equal MAE falls back to the name."""
        assert rank_models({"b": 0.5, "a": 0.5, "c": 0.1}) == ["c", "a", "b"]

    def test_empty(self):
        """Nothing to rank."""
        assert rank_models({}) == []
