"""
Pipeline Service for RepAgg.
Runs ingest -> profile -> cross-validated learning -> scoring -> evaluation and
hands the results to the report formatter. Every stage failure is re-raised as a
StageError naming the stage.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, Iterator, List, Optional, Sequence, Tuple, TypeVar

from repagg_app.app import __version__
from repagg_app.app.agents.report_formatter_agent import ReportFormatterAgent, read_scores_csv
from repagg_app.app.config import FORMAT_ML100K, FORMAT_ML10M, FORMAT_ML1M, MIN_TOPK_SIZE, PUBLISHED_MAE, RATINGS_FILE
from repagg_app.app.errors import ConfigError, DataError, StageError
from repagg_app.app.schemas import EvalReport, KendallCurve, ModelResult, ValidationReport, WeightMap
from repagg_app.app.settings import RunConfig
from repagg_app.app.tables import ProductScoreTable, ProfileMatrix, RatingTable
from repagg_app.app.tools.aggregation import baseline_label, baseline_scores, method_name, resolve_baseline, score_all
from repagg_app.app.tools.cross_validation import kfold_split, predict_weights_cv
from repagg_app.app.tools.metrics import mae, rank_models, topk_tau_curve
from repagg_app.app.tools.profile_features import profile_arrays, scale_matrix
from repagg_app.app.tools.rating_parser import load_ratings, validate, write_ratings_csv

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")

# Longest names first so "ml-10m" is not read as "ml-1m"
_DATASET_MARKERS = (
    ("ml-10m", FORMAT_ML10M),
    ("ml-100k", FORMAT_ML100K),
    ("ml-1m", FORMAT_ML1M),
)


def infer_dataset_name(config: RunConfig) -> Optional[str]:
    """Published-dataset key from --dataset-name or the dataset path, if recognisable."""
    if config.dataset_name:
        return config.dataset_name.lower()
    if config.dataset is None:
        return None
    text = str(config.dataset).lower()
    for marker, name in _DATASET_MARKERS:
        if marker in text:
            return name
    return None


@dataclass
class LearnedModel:
    name: str
    weights: WeightMap
    scores: ProductScoreTable


@dataclass
class RunResult:
    table: RatingTable
    matrix: Optional[ProfileMatrix]
    learned: List[LearnedModel]
    baselines: Dict[str, ProductScoreTable]
    report: EvalReport
    curves: List[KendallCurve]
    artifacts: List[Path] = field(default_factory=list)


class PipelineService:
    """
    Service wiring the pipeline stages for one RunConfig.
    """

    def __init__(self, config: RunConfig):
        """
        Initialize the pipeline service.

        Args:
            config: Fully resolved run configuration
        """
        self.config = config
        self.formatter = ReportFormatterAgent(config.out)

    @contextmanager
    def stage(self, name: str) -> Iterator[None]:
        logger.info(f"Stage {name} started")
        try:
            yield
        except StageError:
            raise
        except Exception as e:
            logger.error(f"Stage {name} failed: {str(e)}")
            raise StageError(name, e) from e
        logger.info(f"Stage {name} finished")

    def _map(self, fn: Callable[[T], R], items: Sequence[T]) -> List[R]:
        """Apply fn to every item, in parallel when threads > 1; results keep item order."""
        if self.config.threads > 1 and len(items) > 1:
            with ThreadPoolExecutor(max_workers=self.config.threads) as pool:
                return list(pool.map(fn, items))
        return [fn(item) for item in items]

    # Stages

    def ingest(self) -> Tuple[RatingTable, ValidationReport]:
        if self.config.dataset is None:
            raise ConfigError("--dataset is required")
        with self.stage("ingest"):
            table = load_ratings(self.config.dataset, self.config.format)
            report = validate(table)
            logger.info("Dataset statistics", extra=table.stats().model_dump())
        return table, report

    def require_rankable(self, table: RatingTable) -> None:
        """Raise DataError when the table has too few products to rank."""
        if table.product_count < MIN_TOPK_SIZE:
            raise DataError(
                f"ranking needs at least {MIN_TOPK_SIZE} products, {self.config.dataset} has {table.product_count}"
            )

    def write_canonical(self, table: RatingTable) -> Path:
        with self.stage("write"):
            self.config.out.mkdir(parents=True, exist_ok=True)
            return write_ratings_csv(table, self.config.out / RATINGS_FILE)

    def profile(self, table: RatingTable) -> ProfileMatrix:
        with self.stage("profile"):
            consumer_ids, raw = profile_arrays(table, self.config.lambda_config())
            return scale_matrix(consumer_ids, raw)

    def learn(self, matrix: ProfileMatrix) -> Dict[str, WeightMap]:
        weights: Dict[str, WeightMap] = {}
        if not self.config.algorithms:
            return weights
        with self.stage("learn"):
            plan = kfold_split(matrix.consumer_ids.tolist(), self.config.k_folds, self.config.seed)
            logger.info("Fold plan built", extra={"folds": plan.k, "fold_sizes": plan.sizes(), "seed": plan.seed})
            for algorithm in self.config.algorithms:
                spec = self.config.regressor_spec(algorithm)
                weights[spec.algorithm] = predict_weights_cv(
                    matrix,
                    spec,
                    plan,
                    floor=self.config.weight_floor,
                    strict_scaling=self.config.strict_fold_scaling,
                    threads=self.config.threads,
                )
        return weights

    def score(
        self, table: RatingTable, weights: Dict[str, WeightMap]
    ) -> Tuple[Dict[str, ProductScoreTable], Dict[str, ProductScoreTable]]:
        """(learned scores by model name, baseline scores by method name)."""
        with self.stage("score"):
            learned_names = list(weights)
            learned = self._map(lambda name: score_all(table, weights[name], method=name), learned_names)
            specs = [resolve_baseline(table, self.config.baseline_spec(m)) for m in self.config.baselines]
            baselines = self._map(lambda spec: baseline_scores(table, spec), specs)
        return (
            dict(zip(learned_names, learned)),
            {spec.method: scores for spec, scores in zip(specs, baselines)},
        )

    def evaluate(
        self,
        table: RatingTable,
        scores: Dict[str, ProductScoreTable],
        references: Sequence[str],
        kinds: Dict[str, str],
        params: Dict[str, Dict],
        weights: Optional[Dict[str, WeightMap]] = None,
    ) -> Tuple[EvalReport, List[KendallCurve]]:
        """
        MAE per method, the combined and learned-only rankings, and one Kendall
        curve per (reference, other) pair.
        """
        weights = weights or {}
        with self.stage("evaluate"):
            names = list(scores)
            maes = dict(zip(names, self._map(lambda name: mae(table, scores[name]), names)))
            published = PUBLISHED_MAE.get(infer_dataset_name(self.config) or "", {})

            models = []
            for name in names:
                weight_map = weights.get(name)
                reference_mae = published.get(method_name(name))
                models.append(
                    ModelResult(
                        name=name,
                        kind=kinds.get(name, "model"),
                        params=params.get(name, {}),
                        mae=maes[name],
                        cv_mae=weight_map.cv_mae if weight_map else None,
                        fold_diagnostics=weight_map.fold_diagnostics if weight_map else [],
                        published_mae=reference_mae,
                        delta=maes[name] - reference_mae if reference_mae is not None else None,
                    )
                )

            pairs = [(ref, other) for ref in references for other in names if other != ref]
            named = {name: scores[name].relabel(name) for name in names}
            curves = self._map(lambda pair: topk_tau_curve(named[pair[0]], named[pair[1]]), pairs)

            report = EvalReport(
                dataset=infer_dataset_name(self.config) or str(self.config.dataset),
                fading=self.config.fading,
                seed=self.config.seed,
                models=models,
                ranking=rank_models(maes),
                model_ranking=rank_models({n: maes[n] for n in names if kinds.get(n, "model") == "model"}),
                curves=curves,
            )
            logger.info("Evaluation finished", extra={"ranking": report.ranking})
        return report, curves

    # Commands

    def run(self) -> RunResult:
        """Execute every stage and write the full artifact set."""
        table, _ = self.ingest()
        self.require_rankable(table)
        matrix = self.profile(table)
        weights = self.learn(matrix)
        learned_scores, baseline_tables = self.score(table, weights)

        scores: Dict[str, ProductScoreTable] = {**learned_scores, **baseline_tables}
        kinds = {**{n: "model" for n in learned_scores}, **{n: "baseline" for n in baseline_tables}}
        params: Dict[str, Dict] = {
            name: self.config.regressor_spec(name).params() for name in learned_scores
        }
        for method in baseline_tables:
            spec = resolve_baseline(table, self.config.baseline_spec(method))
            params[method] = {**spec.model_dump(exclude={"method"}), "label": baseline_label(spec)}

        references = list(learned_scores) or list(scores)[:1]
        report, curves = self.evaluate(table, scores, references, kinds, params, weights)

        with self.stage("write"):
            artifacts = [self.formatter.write_profiles(matrix)]
            for name, weight_map in weights.items():
                artifacts.append(self.formatter.write_weights(name, weight_map))
            for name, score_table in scores.items():
                artifacts.append(self.formatter.write_scores(score_table, name))
            artifacts.append(self.formatter.write_eval(report))
            artifacts.append(self.formatter.write_kendall(curves))
            artifacts.append(self.formatter.write_run(self.run_info(table, params, artifacts)))

        learned = [LearnedModel(name, weights[name], learned_scores[name]) for name in learned_scores]
        return RunResult(table, matrix, learned, baseline_tables, report, curves, artifacts)

    def evaluate_files(self, score_paths: Sequence[Path]) -> Tuple[EvalReport, List[KendallCurve]]:
        """Evaluate previously written score CSVs; the first file is the Kendall reference."""
        table, _ = self.ingest()
        self.require_rankable(table)
        with self.stage("load-scores"):
            loaded = [read_scores_csv(path) for path in score_paths]
        scores: Dict[str, ProductScoreTable] = {}
        for score_table, path in zip(loaded, score_paths):
            name = method_name(score_table.method) or Path(path).stem
            if name in scores:
                raise ConfigError(f"two score files describe method {name!r}")
            scores[name] = score_table
        kinds = {name: ("model" if name.upper() == name else "baseline") for name in scores}
        params = {name: {"label": t.method, "source": str(p)} for (name, t), p in zip(scores.items(), score_paths)}

        report, curves = self.evaluate(table, scores, list(scores)[:1], kinds, params)
        with self.stage("write"):
            self.formatter.write_eval(report)
            self.formatter.write_kendall(curves)
        return report, curves

    def run_info(self, table: RatingTable, params: Dict[str, Dict], artifacts: Sequence[Path]) -> Dict:
        """Everything needed to reproduce the run, defaults and derived values included."""
        derived = {
            "dataset_name": infer_dataset_name(self.config),
            "rating_levels": table.rating_levels,
            "params": params,
        }
        return {
            "version": __version__,
            "run_id": self.config.run_id(),
            "config": self.config.resolved(),
            "derived": derived,
            "dataset": table.stats().model_dump(),
            "artifacts": sorted(Path(p).name for p in artifacts),
        }
