"""
Rating Parser Tool for reading MovieLens-format rating logs into a RatingTable.

Supported wire formats:
  ml-100k  user<TAB>item<TAB>rating<TAB>timestamp
  ml-1m    UserID::MovieID::Rating::Timestamp  (also the 10M dataset)
  csv      header consumer_id,product_id,rating,timestamp
"""

import io
import logging
from pathlib import Path
from typing import BinaryIO, Iterator, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from repagg_app.app.config import (
    FORMAT_CSV,
    FORMAT_ML100K,
    FORMAT_ML10M,
    FORMAT_ML1M,
    HALF_STAR_LEVELS,
    INTEGER_LEVELS,
    MAX_RATING,
    MIN_RATING,
    RATINGS_CSV_HEADER,
    SUPPORTED_FORMATS,
)
from repagg_app.app.errors import DataError, EmptyInputError, MalformedLineError, RatingRangeError
from repagg_app.app.schemas import DatasetStats, ValidationReport
from repagg_app.app.tables import RatingTable

logger = logging.getLogger(__name__)

_SEPARATORS = {FORMAT_ML100K: "\t", FORMAT_ML1M: "::", FORMAT_ML10M: "::", FORMAT_CSV: ","}
_HEADER_LINE = ",".join(RATINGS_CSV_HEADER)


def _decode(raw: bytes) -> str:
    for encoding in ("utf-8", "latin-1"):
        try:
            return raw.decode(encoding)
        except UnicodeDecodeError:
            continue
    raise DataError("could not decode rating input")  # pragma: no cover - latin-1 accepts any byte


def _data_lines(text: str, skip: int) -> Iterator[Tuple[int, str]]:
    """Yield (1-based line number, line) for non-blank lines after `skip` leading non-blank lines."""
    seen = 0
    for number, line in enumerate(io.StringIO(text), start=1):
        line = line.rstrip("\r\n")
        if not line.strip():
            continue
        seen += 1
        if seen > skip:
            yield number, line


def _line_of_row(text: str, skip: int, row: int) -> Tuple[int, str]:
    for position, (number, line) in enumerate(_data_lines(text, skip)):
        if position == row:
            return number, line
    return 0, ""


def _first_bad_field_count(text: str, skip: int, separator: str) -> Optional[Tuple[int, str]]:
    for number, line in _data_lines(text, skip):
        if len(line.split(separator)) != len(RATINGS_CSV_HEADER):
            return number, line
    return None


def detect_levels(ratings: np.ndarray, fmt: str) -> Tuple[float, ...]:
    """
    Admissible rating levels for a format.

    ml-100k is integer-only. ml-1m shares its wire form with the 10M dataset, so it
    and csv switch to half-star levels when any non-integer value is present.
    """
    if fmt == FORMAT_ML10M:
        return HALF_STAR_LEVELS
    if fmt == FORMAT_ML100K:
        return INTEGER_LEVELS
    if len(ratings) and np.any(np.floor(ratings) != ratings):
        return HALF_STAR_LEVELS
    return INTEGER_LEVELS


def _read_frame(text: str, fmt: str) -> pd.DataFrame:
    separator = _SEPARATORS[fmt]
    skip = 0
    body = text

    if fmt == FORMAT_CSV:
        first = next(_data_lines(text, 0), None)
        if first is None or first[1].strip().replace(" ", "") != _HEADER_LINE:
            number, line = first if first else (1, "")
            raise MalformedLineError(number, line, f"expected header {_HEADER_LINE!r}")
        skip = 1
    elif separator == "::":
        body = text.replace("::", "\t")
        separator = "\t"

    try:
        frame = pd.read_csv(
            io.StringIO(body),
            sep=separator,
            header=None,
            skiprows=_header_skip(text) if skip else None,
            skip_blank_lines=True,
            engine="c",
        )
    except pd.errors.ParserError as e:
        bad = _first_bad_field_count(text, skip, _SEPARATORS[fmt])
        if bad is not None:
            raise MalformedLineError(bad[0], bad[1], "wrong number of fields") from e
        raise DataError(f"could not parse ratings: {e}") from e
    except pd.errors.EmptyDataError as e:
        raise EmptyInputError("no rating records in input") from e

    if frame.shape[1] != len(RATINGS_CSV_HEADER):
        bad = _first_bad_field_count(text, skip, _SEPARATORS[fmt])
        number, line = bad if bad else _line_of_row(text, skip, 0)
        raise MalformedLineError(number, line, "wrong number of fields")

    frame.columns = RATINGS_CSV_HEADER
    return _coerce(frame, text, skip)


def _header_skip(text: str) -> int:
    """Physical lines up to and including the csv header."""
    number, _ = next(_data_lines(text, 0))
    return number


def _coerce(frame: pd.DataFrame, text: str, skip: int) -> pd.DataFrame:
    """Convert columns to numbers, reporting the first offending line."""
    numeric = frame.apply(pd.to_numeric, errors="coerce") if any(
        frame[c].dtype == object for c in frame.columns
    ) else frame

    values = numeric.to_numpy(dtype=float)
    ids = values[:, :2]
    timestamps = values[:, 3]
    bad = (
        np.isnan(values).any(axis=1)
        | (np.floor(ids) != ids).any(axis=1)
        | (ids < 1).any(axis=1)
        | (np.floor(timestamps) != timestamps)
        | (timestamps < 0)
    )
    if bad.any():
        row = int(np.argmax(bad))
        number, line = _line_of_row(text, skip, row)
        raise MalformedLineError(number, line)

    ratings = values[:, 2]
    out_of_range = (ratings < MIN_RATING) | (ratings > MAX_RATING)
    if out_of_range.any():
        row = int(np.argmax(out_of_range))
        number, _ = _line_of_row(text, skip, row)
        raise RatingRangeError(number, float(ratings[row]))

    return pd.DataFrame(
        {
            "consumer_id": values[:, 0].astype(np.int64),
            "product_id": values[:, 1].astype(np.int64),
            "rating": ratings,
            "timestamp": timestamps.astype(np.int64),
        }
    )


def parse_ratings(
    source: Union[BinaryIO, bytes], fmt: str, levels: Optional[Sequence[float]] = None
) -> RatingTable:
    """
    Parse a rating log into a fully indexed RatingTable.

    Args:
        source: Readable byte stream or raw bytes
        fmt: One of ml-100k, ml-1m (ml-10m alias) or csv
        levels: Admissible rating levels; detected from the format and values when None.
            Pin them to re-read a canonical csv written from another format.

    Returns:
        RatingTable with duplicate (consumer, product) pairs resolved to the latest timestamp

    Raises:
        MalformedLineError: a line does not match the wire format
        RatingRangeError: a rating outside [0.5, 5.0]
        EmptyInputError: no records
    """
    if fmt not in SUPPORTED_FORMATS:
        raise DataError(f"unsupported format {fmt!r}; expected one of {', '.join(SUPPORTED_FORMATS)}")

    raw = source if isinstance(source, (bytes, bytearray)) else source.read()
    text = _decode(bytes(raw))
    if not text.strip():
        raise EmptyInputError("no rating records in input")

    frame = _read_frame(text, fmt)
    if frame.empty:
        raise EmptyInputError("no rating records in input")

    if levels is None:
        levels = detect_levels(frame["rating"].to_numpy(), fmt)
    table = RatingTable.from_frame(frame, tuple(levels))

    logger.info(
        "Parsed ratings",
        extra={
            "format": fmt,
            "records_read": len(frame),
            "duplicates_removed": table.duplicates_removed,
            "consumers": table.consumer_count,
            "products": table.product_count,
            "ratings": len(table),
        },
    )
    return table


def load_ratings(path: Union[str, Path], fmt: str, levels: Optional[Sequence[float]] = None) -> RatingTable:
    """
    Parse a rating file from disk.

    Raises:
        DataError: the file does not exist, plus everything parse_ratings raises
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"file not found: {path}")
    logger.info(f"Reading ratings from {path} ({fmt})")
    with open(path, "rb") as f:
        return parse_ratings(f, fmt, levels)


def dataset_stats(table: RatingTable) -> DatasetStats:
    """Distinct consumers, distinct products and total records."""
    return table.stats()


def validate(table: RatingTable) -> ValidationReport:
    """
    Report anomalies in a table: duplicates removed at build time, ratings that
    are not one of the admissible levels, and the timestamp range.
    """
    ratings = table.ratings
    off_level = ~np.isin(ratings, np.asarray(table.rating_levels, dtype=float))
    timestamps = table.to_frame()["timestamp"]

    report = ValidationReport(
        duplicates_removed=table.duplicates_removed,
        out_of_level_count=int(off_level.sum()),
        out_of_level_values=sorted(float(v) for v in np.unique(ratings[off_level])),
        min_timestamp=int(timestamps.min()) if len(timestamps) else None,
        max_timestamp=int(timestamps.max()) if len(timestamps) else None,
        rating_step=table.rating_step,
        consumer_count=table.consumer_count,
        product_count=table.product_count,
    )
    if report.out_of_level_count:
        logger.warning(
            "Ratings outside the admissible levels",
            extra={"out_of_level_count": report.out_of_level_count, "values": report.out_of_level_values},
        )
    return report


def format_ratings_csv(table: RatingTable) -> str:
    """
    Render a table in the generic csv wire format, sorted by consumer then product.
    The csv carries no level set: re-read it with levels=table.rating_levels to get an
    equal table back when the source format fixed the levels (ml-100k with half-stars).
    """
    return table.to_frame().to_csv(index=False, lineterminator="\n")


def write_ratings_csv(table: RatingTable, output_path: Union[str, Path]) -> Path:
    output_path = Path(output_path)
    output_path.write_text(format_ratings_csv(table), encoding="utf-8")
    logger.info(f"Canonical ratings written to {output_path}")
    return output_path


def ratings_from_rows(rows: Sequence[Tuple[int, int, float, int]], fmt: str = FORMAT_CSV) -> RatingTable:
    """Build a table from in-memory (consumer, product, rating, timestamp) tuples."""
    frame = pd.DataFrame(list(rows), columns=RATINGS_CSV_HEADER)
    if frame.empty:
        raise EmptyInputError("no rating records in input")
    frame = frame.astype({"consumer_id": "int64", "product_id": "int64", "rating": "float64", "timestamp": "int64"})
    return RatingTable.from_frame(frame, detect_levels(frame["rating"].to_numpy(), fmt))
