"""
Application-wide constants for the Reputation Aggregation Engine (RepAgg).
"""

from typing import Dict, List, Tuple

# Wire formats
FORMAT_ML100K = "ml-100k"
FORMAT_ML1M = "ml-1m"
FORMAT_ML10M = "ml-10m"  # alias of ml-1m
FORMAT_CSV = "csv"
SUPPORTED_FORMATS = (FORMAT_ML100K, FORMAT_ML1M, FORMAT_ML10M, FORMAT_CSV)

RATINGS_CSV_HEADER: List[str] = ["consumer_id", "product_id", "rating", "timestamp"]

# Rating scale
MIN_RATING = 0.5
MAX_RATING = 5.0
INTEGER_LEVELS: Tuple[float, ...] = (1.0, 2.0, 3.0, 4.0, 5.0)
HALF_STAR_LEVELS: Tuple[float, ...] = tuple(0.5 * step for step in range(1, 11))

# Tendency bins (midpoint thresholds, collapse to {1,2}/{3}/{4,5} on integers)
NEGATIVE_MAX = 2.5
POSITIVE_MIN = 3.5

# Profile extraction
DEFAULT_LAMBDA = 0.95
PROFILE_FEATURES: List[str] = ["pos", "nut", "ngv", "exp", "fluc"]
PROFILE_TARGET = "rel"
PROFILE_COLUMNS: List[str] = PROFILE_FEATURES + [PROFILE_TARGET]
FLUCTUATION_FLOOR = 2.2250738585072014e-308  # smallest normal double; fluc stays positive
COUNT_FEATURES: List[str] = ["pos", "nut", "ngv"]

# Learning
DEFAULT_K_FOLDS = 10
DEFAULT_SEED = 0
DEFAULT_WEIGHT_FLOOR = 0.01
ALGORITHMS: List[str] = ["lr", "rt", "svr", "knn"]
RIDGE_JITTER = 1e-8
DENSE_KERNEL_MAX_ROWS = 3000
KERNEL_CACHE_ROWS = 1024
SVR_MIN_ITERATIONS = 1_000_000
KNN_QUERY_CHUNK = 32
SPLIT_TOLERANCE = 1e-12

# Aggregation
BASELINES: List[str] = ["average", "median", "imdb", "bayesian", "dirichlet"]
DEFAULT_PRIOR_WEIGHT = 2.0
IMDB_DEFAULT_PERCENTILE = 25.0
ZERO_WEIGHT_SUM = 1e-12

# Evaluation
KENDALL_THRESHOLDS: List[int] = [1, 10, 20, 30, 40, 50, 60, 70, 80, 90, 100]
MIN_TOPK_SIZE = 2
TAU_UNIT_TOLERANCE = 1e-12

# Output artifacts
SIGNIFICANT_DIGITS = 9
PROFILES_FILE = "profiles.csv"
RATINGS_FILE = "ratings.csv"
RUN_FILE = "run.json"
EVAL_FILE = "eval.json"
KENDALL_FILE = "kendall.csv"
WEIGHTS_FILE_TEMPLATE = "weights_{name}.csv"
SCORES_FILE_TEMPLATE = "scores_{name}.csv"

# Published MAE values used as reference numbers in reports
PUBLISHED_MAE: Dict[str, Dict[str, float]] = {
    "ml-100k": {
        "LR": 0.75, "RT": 0.71, "SVR": 0.82, "KNN": 0.79,
        "average": 0.91, "median": 0.89, "bayesian": 0.90, "dirichlet": 0.89,
        "imdb": 0.91, "betadr": 0.89, "fuzzy": 0.92, "lq": 1.02,
    },
    "ml-1m": {
        "LR": 0.73, "RT": 0.69, "SVR": 0.77, "KNN": 0.76,
        "average": 0.86, "median": 0.84, "bayesian": 0.86, "dirichlet": 0.84,
        "imdb": 0.87, "betadr": 0.84, "fuzzy": 0.87, "lq": 0.97,
    },
    "ml-10m": {
        "LR": 0.67, "RT": 0.65, "SVR": 0.78, "KNN": 0.72,
        "average": 0.84, "median": 0.81, "bayesian": 0.84, "dirichlet": 0.84,
        "imdb": 0.86, "betadr": 0.83, "fuzzy": 0.85, "lq": 0.96,
    },
}

# CLI exit codes
EXIT_OK = 0
EXIT_CONFIG_ERROR = 1
EXIT_DATA_ERROR = 2
EXIT_INVARIANT_ERROR = 3
