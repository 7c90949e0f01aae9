"""
Tests for the report formatter agent: artifact layout, number formatting and
reading score CSVs back.
"""

import json

import numpy as np
import pytest

from repagg_app.app.agents.report_formatter_agent import ReportFormatterAgent, read_scores_csv
from repagg_app.app.errors import DataError
from repagg_app.app.schemas import EvalReport, FoldDiagnostic, KendallCurve, KendallPoint, ModelResult, WeightMap
from repagg_app.app.tables import ProductScoreTable
from repagg_app.app.tools.profile_features import build_profiles, minmax_scale


@pytest.fixture
def formatter(tmp_path):
    return ReportFormatterAgent(tmp_path / "out")


@pytest.fixture
def scores():
    return ProductScoreTable(np.array([30, 10, 20]), np.array([1.0, 4.123456789012, 2.5]), np.array([1, 3, 2]), "RT")


class TestReportFormatterAgent:
    """Test suite for CSV and JSON rendering."""

    def test_scores_csv_sorted_with_nine_digits(self, formatter, scores):
        """Rows follow product_id and floats keep 9 significant digits."""
        lines = formatter.format_scores(scores).splitlines()

        assert lines[0] == "product_id,score,n_ratings,method"
        assert lines[1] == "10,4.12345679,3,RT"
        assert [line.split(",")[0] for line in lines[1:]] == ["10", "20", "30"]

    def test_profiles_csv_holds_raw_values(self, formatter, small_table):
        """profiles.csv carries unscaled variables, one row per consumer."""
        matrix = minmax_scale(build_profiles(small_table))
        lines = formatter.format_profiles(matrix).splitlines()

        assert lines[0] == "consumer_id,pos,nut,ngv,exp,fluc,rel"
        assert len(lines) == 1 + 4
        assert lines[1].startswith("1,2,1,1,1,")

    def test_weights_csv(self, formatter):
        """Consumers ascending with prediction and weight."""
        weights = WeightMap(weights={2: 0.5, 1: 1.0}, predicted={2: 0.5, 1: -0.2})
        lines = formatter.format_weights(weights).splitlines()

        assert lines == ["consumer_id,predicted_rel_scaled,weight", "1,-0.2,1", "2,0.5,0.5"]

    def test_kendall_csv_one_row_per_point(self, formatter):
        """Each curve point becomes a row."""
        curve = KendallCurve(
            reference="RT",
            other="average",
            points=[KendallPoint(threshold_pct=1, tau=1.0, set_size=2), KendallPoint(threshold_pct=100, tau=0.25, set_size=9)],
        )
        lines = formatter.format_kendall([curve]).splitlines()

        assert lines[0] == "reference,other,threshold_pct,set_size,tau"
        assert lines[2] == "RT,average,100,9,0.25"

    def test_eval_json_uses_lambda_key(self, formatter):
        """The fading factor appears as 'lambda'; curves stay out of the JSON."""
        report = EvalReport(
            dataset="ml-100k",
            fading=0.95,
            seed=0,
            models=[
                ModelResult(
                    name="RT",
                    mae=0.7,
                    cv_mae=0.1,
                    fold_diagnostics=[FoldDiagnostic(fold=0, train_size=9, test_size=1, mae=0.1)],
                )
            ],
            ranking=["RT"],
            model_ranking=["RT"],
        )
        payload = json.loads(formatter.format_eval(report))

        assert payload["lambda"] == 0.95
        assert "curves" not in payload
        assert payload["models"][0]["fold_diagnostics"][0]["test_size"] == 1

    def test_written_files_use_unix_newlines(self, formatter, scores):
        """Files are written with '\\n' endings under the output directory."""
        path = formatter.write_scores(scores)

        assert path.name == "scores_RT.csv"
        assert b"\r\n" not in path.read_bytes()

    def test_labels_become_safe_file_names(self, formatter, scores):
        """Bracketed parameter labels are sanitised for the file system."""
        path = formatter.write_scores(scores.relabel("imdb[m=12]"))
        assert path.name == "scores_imdb_m_12.csv"

    def test_run_json_sorted_keys(self, formatter):
        """run.json keys are sorted for stable output."""
        text = formatter.format_run({"b": 1, "a": {"d": 2, "c": 3}})
        assert text.index('"a"') < text.index('"b"')
        assert text.index('"c"') < text.index('"d"')


class TestReadScoresCsv:
    """Test suite for loading score tables back."""

    def test_reads_what_was_written(self, formatter, scores):
        """Scores survive a write/read cycle at 9 significant digits."""
        loaded = read_scores_csv(formatter.write_scores(scores))

        assert loaded.method == "RT"
        assert loaded.product_ids.tolist() == [10, 20, 30]
        assert loaded.score_of(10) == pytest.approx(4.12345679, abs=1e-12)

    def test_missing_file(self, tmp_path):
        """An absent file reports 'file not found'."""
        with pytest.raises(DataError, match="file not found"):
            read_scores_csv(tmp_path / "nope.csv")

    def test_wrong_header(self, tmp_path):
        """Only the score header is accepted."""
        path = tmp_path / "bad.csv"
        path.write_text("product,score\n1,2.0\n", encoding="utf-8")
        with pytest.raises(DataError, match="expected header"):
            read_scores_csv(path)

    def test_duplicate_products(self, tmp_path):
        """A product may appear only once."""
        path = tmp_path / "dup.csv"
        path.write_text("product_id,score,n_ratings,method\n1,2.0,1,x\n1,3.0,1,x\n", encoding="utf-8")
        with pytest.raises(DataError, match="duplicate"):
            read_scores_csv(path)
