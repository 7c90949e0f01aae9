"""
Report Formatter Agent for writing run artifacts: profile, weight, score and
Kendall CSVs, the eval JSON and run.json.

Every CSV uses `\\n` line endings and 9 significant digits so identical runs
produce byte-identical files.
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, Iterable, List, Union

import pandas as pd

from repagg_app.app.config import (
    EVAL_FILE,
    KENDALL_FILE,
    PROFILES_FILE,
    RUN_FILE,
    SCORES_FILE_TEMPLATE,
    SIGNIFICANT_DIGITS,
    WEIGHTS_FILE_TEMPLATE,
)
from repagg_app.app.errors import DataError
from repagg_app.app.schemas import EvalReport, KendallCurve, WeightMap
from repagg_app.app.tables import ProductScoreTable, ProfileMatrix, scores_from_frame

logger = logging.getLogger(__name__)

FLOAT_FORMAT = f"%.{SIGNIFICANT_DIGITS}g"
SCORES_HEADER = ["product_id", "score", "n_ratings", "method"]
WEIGHTS_HEADER = ["consumer_id", "predicted_rel_scaled", "weight"]
KENDALL_HEADER = ["reference", "other", "threshold_pct", "set_size", "tau"]


def _safe_name(name: str) -> str:
    """File-name-safe form of a method label."""
    return "".join(ch if ch.isalnum() or ch in "-_." else "_" for ch in name).strip("_")


class ReportFormatterAgent:
    """
    Agent responsible for rendering pipeline results into their file formats.
    Formatting methods return strings; write methods put them under an output directory.
    """

    def __init__(self, output_dir: Union[str, Path]):
        self.output_dir = Path(output_dir)

    def _write(self, name: str, content: str) -> Path:
        self.output_dir.mkdir(parents=True, exist_ok=True)
        path = self.output_dir / name
        try:
            with open(path, "w", encoding="utf-8", newline="") as f:
                f.write(content)
        except OSError as e:
            logger.error(f"Error writing {path}: {str(e)}")
            raise
        logger.info(f"Artifact written to {path}")
        return path

    # CSV rendering

    def format_profiles(self, matrix: ProfileMatrix) -> str:
        """Raw (unscaled) profile variables, one row per consumer."""
        return matrix.to_frame(scaled=False).to_csv(index=False, float_format=FLOAT_FORMAT, lineterminator="\n")

    def format_weights(self, weights: WeightMap) -> str:
        ids = sorted(weights.weights)
        frame = pd.DataFrame(
            {
                "consumer_id": ids,
                "predicted_rel_scaled": [weights.predicted[cid] for cid in ids],
                "weight": [weights.weights[cid] for cid in ids],
            },
            columns=WEIGHTS_HEADER,
        )
        return frame.to_csv(index=False, float_format=FLOAT_FORMAT, lineterminator="\n")

    def format_scores(self, scores: ProductScoreTable) -> str:
        frame = scores.to_frame()[SCORES_HEADER]
        return frame.to_csv(index=False, float_format=FLOAT_FORMAT, lineterminator="\n")

    def format_kendall(self, curves: Iterable[KendallCurve]) -> str:
        rows = [
            (curve.reference, curve.other, point.threshold_pct, point.set_size, point.tau)
            for curve in curves
            for point in curve.points
        ]
        frame = pd.DataFrame(rows, columns=KENDALL_HEADER)
        return frame.to_csv(index=False, float_format=FLOAT_FORMAT, lineterminator="\n")

    # JSON rendering

    def format_eval(self, report: EvalReport) -> str:
        return json.dumps(report.model_dump(mode="json", by_alias=True), indent=2) + "\n"

    def format_run(self, run_info: Dict[str, Any]) -> str:
        return json.dumps(run_info, indent=2, sort_keys=True) + "\n"

    # File output

    def write_profiles(self, matrix: ProfileMatrix) -> Path:
        return self._write(PROFILES_FILE, self.format_profiles(matrix))

    def write_weights(self, name: str, weights: WeightMap) -> Path:
        return self._write(WEIGHTS_FILE_TEMPLATE.format(name=_safe_name(name)), self.format_weights(weights))

    def write_scores(self, scores: ProductScoreTable, name: str = "") -> Path:
        file_name = SCORES_FILE_TEMPLATE.format(name=_safe_name(name or scores.method))
        return self._write(file_name, self.format_scores(scores))

    def write_kendall(self, curves: Iterable[KendallCurve]) -> Path:
        return self._write(KENDALL_FILE, self.format_kendall(curves))

    def write_eval(self, report: EvalReport) -> Path:
        return self._write(EVAL_FILE, self.format_eval(report))

    def write_run(self, run_info: Dict[str, Any]) -> Path:
        return self._write(RUN_FILE, self.format_run(run_info))


def read_scores_csv(path: Union[str, Path]) -> ProductScoreTable:
    """
    Load a score table written by `write_scores`.

    Raises:
        DataError: missing file or wrong header
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"file not found: {path}")
    try:
        frame = pd.read_csv(path)
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise DataError(f"could not read scores from {path}: {e}") from e

    columns: List[str] = list(frame.columns)
    if columns != SCORES_HEADER:
        raise DataError(f"{path}: expected header {','.join(SCORES_HEADER)}, got {','.join(columns)}")
    if frame["product_id"].duplicated().any():
        raise DataError(f"{path}: duplicate product_id rows")
    return scores_from_frame(frame, method=str(frame["method"].iloc[0]) if len(frame) else path.stem)
