"""
Run configuration for RepAgg using pydantic-settings.

A run is fully described by a RunConfig. Values come from command-line flags,
then a `key = value` config file, then the field defaults. Environment variables
and .env files are deliberately not consulted so a run.json alone reproduces a run.
"""

import hashlib
import json
from pathlib import Path
from typing import Any, Dict, List, Literal, Mapping, Optional, Tuple, Type

from dotenv import dotenv_values
from pydantic import AliasChoices, Field, ValidationError, field_validator, model_validator
from pydantic_settings import BaseSettings, PydanticBaseSettingsSource, SettingsConfigDict

from repagg_app.app import __version__
from repagg_app.app.config import (
    ALGORITHMS,
    BASELINES,
    DEFAULT_K_FOLDS,
    DEFAULT_LAMBDA,
    DEFAULT_PRIOR_WEIGHT,
    DEFAULT_SEED,
    DEFAULT_WEIGHT_FLOOR,
    FORMAT_ML100K,
)
from repagg_app.app.errors import ConfigError
from repagg_app.app.schemas import BaselineSpec, LambdaConfig, RegressorSpec

# Config-file keys that differ from the field they set
_KEY_ALIASES = {
    "algo": "algorithms",
    "algos": "algorithms",
    "baseline": "baselines",
    "lambda": "fading",
    "config": None,
}

# Fields that never change a result byte; kept out of run.json and the run id
EXECUTION_FIELDS = {"out", "threads", "log_level", "print_validation", "scores"}


def _split_names(value: Any) -> Any:
    if isinstance(value, str):
        return [part.strip().lower() for part in value.split(",") if part.strip()]
    if isinstance(value, (list, tuple)):
        return [str(part).strip().lower() for part in value]
    return value


class RunConfig(BaseSettings):
    """
    Every parameter of a run, resolved. Dumped verbatim to run.json.
    """

    # Input / output
    dataset: Optional[Path] = None
    format: Literal["ml-100k", "ml-1m", "ml-10m", "csv"] = FORMAT_ML100K
    dataset_name: Optional[str] = None
    out: Path = Path("out")
    scores: List[Path] = Field(default_factory=list)

    # Pipeline
    fading: float = Field(default=DEFAULT_LAMBDA, gt=0.0, lt=1.0, validation_alias=AliasChoices("fading", "lambda"))
    algorithms: List[str] = Field(default_factory=lambda: list(ALGORITHMS))
    baselines: List[str] = Field(default_factory=lambda: list(BASELINES))
    k_folds: int = Field(default=DEFAULT_K_FOLDS, ge=2)
    seed: int = Field(default=DEFAULT_SEED, ge=0)
    weight_floor: float = Field(default=DEFAULT_WEIGHT_FLOOR, gt=0.0, le=1.0)
    strict_fold_scaling: bool = False
    threads: int = Field(default=1, ge=1)

    # Regressor hyperparameters
    knn_k: int = Field(default=5, ge=1)
    svr_c: float = Field(default=1.0, gt=0.0)
    svr_epsilon: float = Field(default=0.1, ge=0.0)
    svr_gamma: Optional[float] = Field(default=None, gt=0.0)
    svr_tolerance: float = Field(default=1e-3, gt=0.0)
    svr_max_iter: Optional[int] = Field(default=None, ge=1)
    cart_min_leaf: int = Field(default=5, ge=1)
    cart_max_depth: int = Field(default=12, ge=0)
    lr_log_transform: bool = False

    # Baseline parameters
    imdb_m: Optional[float] = Field(default=None, ge=0.0)
    prior_weight: float = Field(default=DEFAULT_PRIOR_WEIGHT, ge=0.0)

    # Reporting
    log_level: Literal["DEBUG", "INFO", "WARNING", "ERROR"] = "INFO"
    print_validation: bool = False

    model_config = SettingsConfigDict(extra="forbid", frozen=True)

    @classmethod
    def settings_customise_sources(
        cls,
        settings_cls: Type[BaseSettings],
        init_settings: PydanticBaseSettingsSource,
        env_settings: PydanticBaseSettingsSource,
        dotenv_settings: PydanticBaseSettingsSource,
        file_secret_settings: PydanticBaseSettingsSource,
    ) -> Tuple[PydanticBaseSettingsSource, ...]:
        return (init_settings,)

    @field_validator("algorithms", "baselines", mode="before")
    @classmethod
    def split_names(cls, value: Any) -> Any:
        return _split_names(value)

    @field_validator("scores", mode="before")
    @classmethod
    def split_paths(cls, value: Any) -> Any:
        if isinstance(value, str):
            return [part.strip() for part in value.split(",") if part.strip()]
        return value

    @field_validator("log_level", mode="before")
    @classmethod
    def upper_level(cls, value: Any) -> Any:
        return value.upper() if isinstance(value, str) else value

    @field_validator("algorithms")
    @classmethod
    def check_algorithms(cls, value: List[str]) -> List[str]:
        unknown = [name for name in value if name not in ALGORITHMS]
        if unknown:
            raise ValueError(f"unknown algorithm(s) {unknown}; expected a subset of {ALGORITHMS}")
        return list(dict.fromkeys(value))

    @field_validator("baselines")
    @classmethod
    def check_baselines(cls, value: List[str]) -> List[str]:
        unknown = [name for name in value if name not in BASELINES]
        if unknown:
            raise ValueError(f"unknown baseline(s) {unknown}; expected a subset of {BASELINES}")
        return list(dict.fromkeys(value))

    @model_validator(mode="after")
    def check_selection(self) -> "RunConfig":
        if not self.algorithms and not self.baselines:
            raise ValueError("select at least one algorithm or baseline")
        return self

    # Derived specs

    def lambda_config(self) -> LambdaConfig:
        return LambdaConfig(fading=self.fading)

    def regressor_spec(self, algorithm: str) -> RegressorSpec:
        return RegressorSpec(
            algorithm=algorithm,
            knn_k=self.knn_k,
            svr_c=self.svr_c,
            svr_epsilon=self.svr_epsilon,
            svr_gamma=self.svr_gamma,
            svr_tolerance=self.svr_tolerance,
            svr_max_iter=self.svr_max_iter,
            cart_min_leaf=self.cart_min_leaf,
            cart_max_depth=self.cart_max_depth,
            lr_log_transform=self.lr_log_transform,
        )

    def baseline_spec(self, method: str) -> BaselineSpec:
        return BaselineSpec(method=method, imdb_m=self.imdb_m, prior_weight=self.prior_weight)

    def resolved(self) -> Dict[str, Any]:
        """JSON-ready dump of every result-affecting field, defaults included."""
        values = self.model_dump(mode="json", exclude=EXECUTION_FIELDS)
        values["lambda"] = values.pop("fading")
        return values

    def run_id(self) -> str:
        """Short stable hash of the resolved configuration."""
        payload = json.dumps({**self.resolved(), "version": __version__}, sort_keys=True)
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:12]


def _normalize_key(key: str) -> Optional[str]:
    key = key.strip().lower().replace("-", "_")
    return _KEY_ALIASES.get(key, key)


def read_config_file(path: Path) -> Dict[str, Any]:
    """
    Read a `key = value` config file (`#` comments allowed).

    Raises:
        ConfigError: file missing or a key without a value
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")

    values: Dict[str, Any] = {}
    for key, value in dotenv_values(path, interpolate=False).items():
        field = _normalize_key(key)
        if field is None:
            continue
        if value is None:
            raise ConfigError(f"config file {path}: key {key!r} has no value")
        values[field] = value
    return values


def load_run_config(overrides: Mapping[str, Any], config_file: Optional[Path] = None) -> RunConfig:
    """
    Merge flags over the config file over defaults.

    Args:
        overrides: Flag values; None means "not given on the command line"
        config_file: Optional `key = value` file

    Raises:
        ConfigError: unreadable file, unknown key or invalid value
    """
    merged: Dict[str, Any] = read_config_file(config_file) if config_file else {}
    for key, value in overrides.items():
        field = _normalize_key(key)
        if field is not None and value is not None:
            merged[field] = value

    try:
        return RunConfig(**merged)
    except ValidationError as e:
        problems = "; ".join(
            f"{'.'.join(str(part) for part in err['loc']) or 'config'}: {err['msg']}" for err in e.errors()
        )
        raise ConfigError(f"invalid configuration: {problems}") from None
