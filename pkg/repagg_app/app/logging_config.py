"""
Structured logging configuration for RepAgg.
Provides formatted JSON logs with consistent fields and run context.
"""

import json
import logging
import sys
from datetime import datetime, timezone
from typing import Any, Dict, Optional

# Attributes every LogRecord carries; only caller-supplied extras are copied over.
_RESERVED = set(vars(logging.LogRecord("", 0, "", 0, "", None, None))) | {"message", "asctime"}


class StructuredFormatter(logging.Formatter):
    """
    Formatter that outputs logs as JSON objects with consistent fields.
    """

    def format(self, record: logging.LogRecord) -> str:
        log_record: Dict[str, Any] = {
            "timestamp": datetime.now(timezone.utc).isoformat(),
            "level": record.levelname,
            "logger": record.name,
            "message": record.getMessage(),
            "module": record.module,
            "function": record.funcName,
            "line": record.lineno,
        }

        if record.exc_info and record.exc_info[1] is not None:
            log_record["exception"] = {
                "type": record.exc_info[0].__name__ if record.exc_info[0] else None,
                "message": str(record.exc_info[1]),
            }

        for key, value in record.__dict__.items():
            if key.startswith("_") or key in _RESERVED or key in log_record:
                continue
            try:
                json.dumps({key: value})
                log_record[key] = value
            except (TypeError, ValueError):
                log_record[key] = str(value)

        return json.dumps(log_record)


class StderrHandler(logging.StreamHandler):
    """StreamHandler bound to whatever sys.stderr is at emit time."""

    def __init__(self):
        super().__init__(sys.stderr)

    @property
    def stream(self):
        return sys.stderr

    @stream.setter
    def stream(self, value):
        pass


class RunIdFilter(logging.Filter):
    """Stamps every record with the id of the current run."""

    def __init__(self, run_id: str):
        super().__init__()
        self.run_id = run_id

    def filter(self, record: logging.LogRecord) -> bool:
        record.run_id = self.run_id
        return True


def configure_logging(level: str = "INFO", run_id: Optional[str] = None) -> logging.Logger:
    """
    Install the structured handler on the package root logger.

    Args:
        level: Log level name
        run_id: Optional run id to include in all log records

    Returns:
        The package root logger
    """
    root = logging.getLogger("repagg_app")

    if not root.handlers:
        handler = StderrHandler()
        handler.setFormatter(StructuredFormatter())
        root.addHandler(handler)
        root.propagate = False

    root.setLevel(level.upper())

    for handler in root.handlers:
        for existing in [f for f in handler.filters if isinstance(f, RunIdFilter)]:
            handler.removeFilter(existing)
        if run_id:
            handler.addFilter(RunIdFilter(run_id))

    return root


def get_logger(name: str) -> logging.Logger:
    """
    Get a logger under the structured package root, installing the handler on first use.

    Args:
        name: Logger name

    Returns:
        Configured logger
    """
    if not logging.getLogger("repagg_app").handlers:
        configure_logging()
    return logging.getLogger(name)
