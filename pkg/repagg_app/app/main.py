"""Command-line entry point for the Reputation Aggregation Engine (RepAgg).

Subcommands:
  ingest    parse a rating log, print "consumers products ratings", write ratings.csv
  profile   write profiles.csv (raw consumer variables)
  run       full pipeline: profiles, weights, scores, eval.json, kendall.csv, run.json
  evaluate  MAE, ranking and Kendall curves for previously written score CSVs
"""

import argparse
import sys
from pathlib import Path
from typing import Any, Callable, Dict, List, NoReturn, Optional

from repagg_app.app import __version__
from repagg_app.app.config import (
    EXIT_CONFIG_ERROR,
    EXIT_DATA_ERROR,
    EXIT_INVARIANT_ERROR,
    EXIT_OK,
    SUPPORTED_FORMATS,
)
from repagg_app.app.errors import ConfigError, DataError, InvariantViolation, ModelError, RepAggError, StageError
from repagg_app.app.logging_config import configure_logging, get_logger
from repagg_app.app.services.pipeline_service import PipelineService
from repagg_app.app.settings import RunConfig, load_run_config

logger = get_logger(__name__)


class _ArgumentParser(argparse.ArgumentParser):
    """Usage errors become ConfigError (exit 1) instead of argparse's exit 2."""

    def error(self, message: str) -> NoReturn:
        raise ConfigError(f"{self.prog}: {message}")


def _common_flags() -> argparse.ArgumentParser:
    # Every default is None so an absent flag never overrides the config file.
    common = _ArgumentParser(add_help=False)
    common.add_argument("--dataset", type=Path, help="Rating log to read")
    common.add_argument("--format", choices=SUPPORTED_FORMATS, help="Wire format of the rating log")
    common.add_argument("--dataset-name", help="Published dataset key (ml-100k, ml-1m, ml-10m) for reference MAEs")
    common.add_argument("--out", type=Path, help="Output directory")
    common.add_argument("--config", type=Path, help="key = value config file")
    common.add_argument("--lambda", dest="fading", type=float, help="Fading factor in (0, 1)")
    common.add_argument("--algo", help="Comma-separated subset of lr,rt,svr,knn")
    common.add_argument("--baseline", help="Comma-separated subset of average,median,imdb,bayesian,dirichlet")
    common.add_argument("--k-folds", type=int, help="Cross-validation folds (>= 2)")
    common.add_argument("--seed", type=int, help="Seed for the fold permutation")
    common.add_argument("--weight-floor", type=float, help="Lowest aggregation weight")
    common.add_argument(
        "--strict-fold-scaling", action="store_const", const=True, help="Refit Min-Max bounds on each training fold"
    )
    common.add_argument("--threads", type=int, help="Worker threads; never changes outputs")
    common.add_argument("--log-level", help="DEBUG, INFO, WARNING or ERROR")

    common.add_argument("--knn-k", type=int)
    common.add_argument("--svr-c", type=float)
    common.add_argument("--svr-epsilon", type=float)
    common.add_argument("--svr-gamma", type=float)
    common.add_argument("--svr-tolerance", type=float)
    common.add_argument("--svr-max-iter", type=int)
    common.add_argument("--cart-min-leaf", type=int)
    common.add_argument("--cart-max-depth", type=int)
    common.add_argument("--lr-log-transform", action="store_const", const=True)
    common.add_argument("--imdb-m", type=float)
    common.add_argument("--prior-weight", type=float)
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_flags()
    parser = _ArgumentParser(prog="repagg", description="Reputation aggregation with learned consumer weights.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    commands = parser.add_subparsers(dest="command", required=True, parser_class=_ArgumentParser)

    ingest = commands.add_parser("ingest", parents=[common], help="Parse and summarise a rating log")
    ingest.add_argument(
        "--validate", dest="print_validation", action="store_const", const=True, help="Print the validation report"
    )
    commands.add_parser("profile", parents=[common], help="Write consumer profiles")
    commands.add_parser("run", parents=[common], help="Run the full pipeline")
    evaluate = commands.add_parser("evaluate", parents=[common], help="Evaluate score CSVs against a dataset")
    evaluate.add_argument("--scores", nargs="+", type=Path, help="Score CSVs; the first is the Kendall reference")
    return parser


def cmd_ingest(config: RunConfig) -> int:
    service = PipelineService(config)
    table, report = service.ingest()
    service.write_canonical(table)
    print(table.stats())
    if config.print_validation:
        print(report.model_dump_json())
    return EXIT_OK


def cmd_profile(config: RunConfig) -> int:
    service = PipelineService(config)
    table, _ = service.ingest()
    matrix = service.profile(table)
    path = service.formatter.write_profiles(matrix)
    print(path)
    return EXIT_OK


def cmd_run(config: RunConfig) -> int:
    result = PipelineService(config).run()
    for name in result.report.ranking:
        print(f"{name} {result.report.mae_of(name):.4f}")
    return EXIT_OK


def cmd_evaluate(config: RunConfig) -> int:
    if not config.scores:
        raise ConfigError("evaluate needs at least one --scores file")
    report, _ = PipelineService(config).evaluate_files(config.scores)
    for name in report.ranking:
        print(f"{name} {report.mae_of(name):.4f}")
    return EXIT_OK


COMMANDS: Dict[str, Callable[[RunConfig], int]] = {
    "ingest": cmd_ingest,
    "profile": cmd_profile,
    "run": cmd_run,
    "evaluate": cmd_evaluate,
}


def exit_code_for(error: BaseException) -> int:
    """Map an error (or the cause inside a StageError) to a CLI exit code."""
    if isinstance(error, StageError):
        return exit_code_for(error.cause)
    if isinstance(error, ConfigError):
        return EXIT_CONFIG_ERROR
    if isinstance(error, InvariantViolation):
        return EXIT_INVARIANT_ERROR
    if isinstance(error, (DataError, ModelError, LookupError, OSError)):
        return EXIT_DATA_ERROR
    return EXIT_INVARIANT_ERROR


def main(argv: Optional[List[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        values: Dict[str, Any] = vars(args)
        command = values.pop("command")
        config_file = values.pop("config", None)
        config = load_run_config(values, config_file)
        configure_logging(config.log_level, config.run_id())
        logger.info(f"Running {command}", extra={"command": command})
        return COMMANDS[command](config)
    except (RepAggError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return exit_code_for(e)
    except Exception as e:
        logger.exception("Unexpected failure")
        print(f"internal error: {e}", file=sys.stderr)
        return EXIT_INVARIANT_ERROR


if __name__ == "__main__":
    sys.exit(main())
