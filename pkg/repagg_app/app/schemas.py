"""
Pydantic models for data validation and serialization.
Defines the small value types passed between the pipeline stages.
"""

from typing import Any, Dict, List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, PositiveInt, field_validator, model_validator

from repagg_app.app.config import (
    DEFAULT_K_FOLDS,
    DEFAULT_LAMBDA,
    DEFAULT_PRIOR_WEIGHT,
    DEFAULT_WEIGHT_FLOOR,
    MAX_RATING,
    MIN_RATING,
    PROFILE_COLUMNS,
    PROFILE_FEATURES,
)


class RatingRecord(BaseModel):
    """
    One rating event as read from a MovieLens-style log.
    """
    model_config = ConfigDict(frozen=True)

    consumer_id: PositiveInt
    product_id: PositiveInt
    rating: float = Field(ge=MIN_RATING, le=MAX_RATING)
    timestamp: int = Field(ge=0)


class DatasetStats(BaseModel):
    """
    Distinct consumer/product counts and total ratings of a table.
    """
    model_config = ConfigDict(frozen=True)

    consumer_count: int = Field(ge=0)
    product_count: int = Field(ge=0)
    rating_count: int = Field(ge=0)

    def __str__(self) -> str:
        return f"{self.consumer_count} {self.product_count} {self.rating_count}"


class ValidationReport(BaseModel):
    """
    Anomalies found while building a rating table. Reporting only.
    """
    duplicates_removed: int = 0
    out_of_level_count: int = 0
    out_of_level_values: List[float] = Field(default_factory=list)
    min_timestamp: Optional[int] = None
    max_timestamp: Optional[int] = None
    rating_step: float = 1.0
    consumer_count: int = 0
    product_count: int = 0

    @property
    def anomaly_count(self) -> int:
        return self.duplicates_removed + self.out_of_level_count


class LambdaConfig(BaseModel):
    """
    Fading factor used to discount rating gaps in the fluctuation variable.
    """
    model_config = ConfigDict(frozen=True, populate_by_name=True)

    fading: float = Field(default=DEFAULT_LAMBDA, gt=0.0, lt=1.0, alias="lambda")


class ConsumerProfile(BaseModel):
    """
    The six extracted variables for a single consumer (raw, unscaled).
    """
    model_config = ConfigDict(frozen=True)

    consumer_id: PositiveInt
    pos: int = Field(ge=0)
    nut: int = Field(ge=0)
    ngv: int = Field(ge=0)
    exp: float = Field(ge=0.0, le=1.0)
    fluc: float = Field(gt=0.0, le=1.0)
    rel: float = Field(ge=0.0)

    @property
    def rating_count(self) -> int:
        return self.pos + self.nut + self.ngv

    def values(self) -> List[float]:
        return [float(getattr(self, name)) for name in PROFILE_COLUMNS]


class ScalingParams(BaseModel):
    """
    Per-variable (min, max) pairs observed when the scaler was fit.
    """
    model_config = ConfigDict(frozen=True)

    bounds: Dict[str, Tuple[float, float]]

    @field_validator("bounds")
    @classmethod
    def check_bounds(cls, value: Dict[str, Tuple[float, float]]) -> Dict[str, Tuple[float, float]]:
        for name, (low, high) in value.items():
            if low > high:
                raise ValueError(f"scaling bounds for {name} have min {low} > max {high}")
        return value

    def _arrays(self, columns: List[str]) -> Tuple[np.ndarray, np.ndarray]:
        low = np.array([self.bounds[name][0] for name in columns], dtype=float)
        high = np.array([self.bounds[name][1] for name in columns], dtype=float)
        return low, high

    def transform(self, raw: np.ndarray, columns: List[str] = PROFILE_COLUMNS, clip: bool = False) -> np.ndarray:
        """Map raw columns to [0, 1]; constant columns map to 0.0."""
        low, high = self._arrays(columns)
        span = high - low
        safe = np.where(span > 0, span, 1.0)
        scaled = np.where(span > 0, (np.asarray(raw, dtype=float) - low) / safe, 0.0)
        return np.clip(scaled, 0.0, 1.0) if clip else scaled

    def inverse(self, scaled: np.ndarray, columns: List[str] = PROFILE_COLUMNS) -> np.ndarray:
        low, high = self._arrays(columns)
        return np.asarray(scaled, dtype=float) * (high - low) + low


class RegressorSpec(BaseModel):
    """
    Algorithm choice plus every hyperparameter the four regressors accept.
    """
    model_config = ConfigDict(frozen=True)

    algorithm: Literal["LR", "RT", "SVR", "KNN"]
    knn_k: int = Field(default=5, ge=1)
    knn_metric: Literal["euclidean"] = "euclidean"
    svr_c: float = Field(default=1.0, gt=0.0)
    svr_epsilon: float = Field(default=0.1, ge=0.0)
    svr_gamma: Optional[float] = Field(default=None, gt=0.0)
    svr_tolerance: float = Field(default=1e-3, gt=0.0)
    svr_max_iter: Optional[int] = Field(default=None, ge=1)
    cart_min_leaf: int = Field(default=5, ge=1)
    cart_max_depth: int = Field(default=12, ge=0)
    lr_log_transform: bool = False

    @field_validator("algorithm", mode="before")
    @classmethod
    def upper_algorithm(cls, value: Any) -> Any:
        return value.upper() if isinstance(value, str) else value

    def gamma_for(self, n_features: int = len(PROFILE_FEATURES)) -> float:
        """Kernel width; defaults to 1 / number of input features."""
        return self.svr_gamma if self.svr_gamma is not None else 1.0 / n_features

    def params(self) -> Dict[str, Any]:
        """Hyperparameters relevant to this algorithm, for reports."""
        relevant = {
            "LR": ["lr_log_transform"],
            "RT": ["cart_min_leaf", "cart_max_depth"],
            "SVR": ["svr_c", "svr_epsilon", "svr_tolerance", "svr_max_iter"],
            "KNN": ["knn_k", "knn_metric"],
        }[self.algorithm]
        params = {name: getattr(self, name) for name in relevant}
        if self.algorithm == "SVR":
            params["svr_gamma"] = self.gamma_for()
        return params


class FoldPlan(BaseModel):
    """
    Assignment of every consumer to one of k cross-validation folds.
    """
    model_config = ConfigDict(frozen=True)

    k: int = Field(default=DEFAULT_K_FOLDS, ge=2)
    seed: int = Field(default=0, ge=0)
    assignment: Dict[int, int]

    @model_validator(mode="after")
    def check_partition(self) -> "FoldPlan":
        sizes = [0] * self.k
        for fold in self.assignment.values():
            if not 0 <= fold < self.k:
                raise ValueError(f"fold index {fold} outside [0, {self.k})")
            sizes[fold] += 1
        if self.assignment and max(sizes) - min(sizes) > 1:
            raise ValueError(f"fold sizes {sizes} differ by more than 1")
        return self

    def members(self, fold: int) -> List[int]:
        """Consumer ids in a fold, ascending."""
        return sorted(cid for cid, f in self.assignment.items() if f == fold)

    def sizes(self) -> List[int]:
        return [sum(1 for f in self.assignment.values() if f == fold) for fold in range(self.k)]


class FoldDiagnostic(BaseModel):
    """
    Per-fold regression error on scaled reliability, plus solver details.
    """
    fold: int
    train_size: int
    test_size: int
    mae: float
    iterations: Optional[int] = None
    converged: Optional[bool] = None


class WeightMap(BaseModel):
    """
    Out-of-fold predicted reliability and the aggregation weight derived from it.
    """
    weights: Dict[int, float]
    predicted: Dict[int, float]
    floor: float = Field(default=DEFAULT_WEIGHT_FLOOR, gt=0.0, le=1.0)
    fold_diagnostics: List[FoldDiagnostic] = Field(default_factory=list)

    @model_validator(mode="after")
    def check_weights(self) -> "WeightMap":
        if set(self.weights) != set(self.predicted):
            raise ValueError("weights and predictions must cover the same consumers")
        for cid, weight in self.weights.items():
            if not self.floor <= weight <= 1.0:
                raise ValueError(f"weight {weight} of consumer {cid} outside [{self.floor}, 1]")
        return self

    @property
    def cv_mae(self) -> Optional[float]:
        if not self.fold_diagnostics:
            return None
        return float(np.mean([d.mae for d in self.fold_diagnostics]))

    @classmethod
    def uniform(cls, consumer_ids: List[int], weight: float = 1.0) -> "WeightMap":
        """Equal weights for every consumer; weighted scores then equal plain means."""
        return cls(
            weights={cid: weight for cid in consumer_ids},
            predicted={cid: 1.0 - weight for cid in consumer_ids},
        )


class BaselineSpec(BaseModel):
    """
    A non-learned aggregation method and its parameters.
    """
    model_config = ConfigDict(frozen=True)

    method: Literal["average", "median", "imdb", "bayesian", "dirichlet"]
    imdb_m: Optional[float] = Field(default=None, ge=0.0)
    prior_weight: float = Field(default=DEFAULT_PRIOR_WEIGHT, ge=0.0)

    @field_validator("method", mode="before")
    @classmethod
    def lower_method(cls, value: Any) -> Any:
        return value.lower() if isinstance(value, str) else value


class KendallPoint(BaseModel):
    threshold_pct: int = Field(ge=1, le=100)
    tau: float = Field(ge=-1.0, le=1.0)
    set_size: int = Field(ge=2)


class KendallCurve(BaseModel):
    """
    Tau between two score tables over the top p% of products, swept over p.
    """
    reference: str
    other: str
    points: List[KendallPoint]

    @field_validator("points")
    @classmethod
    def check_thresholds(cls, points: List[KendallPoint]) -> List[KendallPoint]:
        thresholds = [p.threshold_pct for p in points]
        if any(b <= a for a, b in zip(thresholds, thresholds[1:])):
            raise ValueError(f"thresholds must be strictly increasing: {thresholds}")
        return points


class ModelResult(BaseModel):
    """
    Evaluation of one aggregation method (learned model or baseline).
    """
    name: str
    kind: Literal["model", "baseline"] = "model"
    params: Dict[str, Any] = Field(default_factory=dict)
    mae: float = Field(ge=0.0)
    cv_mae: Optional[float] = None
    fold_diagnostics: List[FoldDiagnostic] = Field(default_factory=list)
    published_mae: Optional[float] = None
    delta: Optional[float] = None


class EvalReport(BaseModel):
    """
    MAE per method, rankings and Kendall curves for one run.
    """
    model_config = ConfigDict(populate_by_name=True)

    dataset: str
    fading: float = Field(alias="lambda")
    seed: int
    models: List[ModelResult]
    ranking: List[str]
    model_ranking: List[str] = Field(default_factory=list)
    curves: List[KendallCurve] = Field(default_factory=list, exclude=True)

    @model_validator(mode="after")
    def check_ranking(self) -> "EvalReport":
        if sorted(self.ranking) != sorted(m.name for m in self.models):
            raise ValueError("ranking must be a permutation of the evaluated methods")
        return self

    def mae_of(self, name: str) -> float:
        for model in self.models:
            if model.name == name:
                return model.mae
        raise KeyError(name)
