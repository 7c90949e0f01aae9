"""
Error hierarchy for RepAgg.
Each family maps to one CLI exit code (see config.EXIT_*).
"""


class RepAggError(Exception):
    """Base class for all errors raised by the engine."""


class ConfigError(RepAggError, ValueError):
    """Invalid or contradictory run configuration."""


class DataError(RepAggError, ValueError):
    """Input data cannot be used as given."""


class MalformedLineError(DataError):
    """A rating line that does not match its wire format."""

    def __init__(self, line_number: int, text: str, reason: str = "malformed line"):
        self.line_number = line_number
        self.text = text
        self.reason = reason
        super().__init__(f"line {line_number}: {reason}: {text!r}")


class RatingRangeError(DataError):
    """A rating outside [0.5, 5.0]."""

    def __init__(self, line_number: int, value: float):
        self.line_number = line_number
        self.value = value
        super().__init__(f"line {line_number}: rating {value} outside [0.5, 5.0]")


class EmptyInputError(DataError):
    """No rating records in the input."""


class MissingWeightError(DataError):
    """A rater without an entry in the weight map."""


class MissingScoreError(DataError):
    """A rated product without a score."""


class ProductSetMismatchError(DataError):
    """Two score lists that do not cover the same products."""


class UnknownConsumerError(RepAggError, LookupError):
    def __init__(self, consumer_id: int):
        self.consumer_id = consumer_id
        super().__init__(f"unknown consumer {consumer_id}")


class UnknownProductError(RepAggError, LookupError):
    def __init__(self, product_id: int):
        self.product_id = product_id
        super().__init__(f"unknown product {product_id}")


class ModelError(RepAggError, ValueError):
    """Regressor misuse: empty training data, non-finite values, wrong arity."""


class InvariantViolation(RepAggError, AssertionError):
    """An internal consistency check failed."""


class StageError(RepAggError):
    """A pipeline stage failed; carries the stage name and the original cause."""

    def __init__(self, stage: str, cause: Exception):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage {stage} failed: {cause}")
