"""
Logging for isoplate.

Solver and scenario code log through `get_logger(__name__)` and attach numbers
with `extra={...}`. Those values are often numpy scalars or small arrays; both
formatters render them as plain Python numbers. Batch runs use JSON lines, the
interactive CLI a compact one-line format on stderr.
"""

import json
import logging
import sys
from datetime import datetime, timezone
from typing import Any, Optional

import numpy as np

from isoplate.core.config import Settings

PACKAGE_PREFIX = 'isoplate.'

# Attributes every LogRecord carries; anything else came in through `extra`
_RECORD_ATTRS = frozenset(vars(logging.LogRecord('', 0, '', 0, '', None, None))) | {'message', 'asctime'}

# Arrays longer than this are summarized instead of listed
MAX_LISTED_VALUES = 8


def _plain(value: Any) -> Any:
    """Numpy values to Python numbers or lists; anything else unchanged."""
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        if value.size <= MAX_LISTED_VALUES:
            return value.tolist()
        return {'shape': list(value.shape), 'norm': float(np.linalg.norm(value))}
    return value


def record_extras(record: logging.LogRecord) -> dict[str, Any]:
    return {key: _plain(value) for key, value in vars(record).items() if key not in _RECORD_ATTRS}


class JsonFormatter(logging.Formatter):
    """One JSON object per record: timestamp, level, logger, message, then the extras."""

    def format(self, record: logging.LogRecord) -> str:
        entry: dict[str, Any] = {
            'timestamp': datetime.fromtimestamp(record.created, tz=timezone.utc).isoformat(timespec='milliseconds'),
            'level': record.levelname,
            'logger': record.name,
            'message': record.getMessage(),
        }
        for key, value in record_extras(record).items():
            if key in entry:
                continue
            try:
                json.dumps(value)
            except (TypeError, ValueError):
                value = str(value)
            entry[key] = value
        if record.exc_info:
            entry['exception'] = self.formatException(record.exc_info)
        return json.dumps(entry)


class HumanFormatter(logging.Formatter):
    """`10:30:00 INFO  [services.solvers] Arc-length step accepted step=12 load_factor=803.2`"""

    def format(self, record: logging.LogRecord) -> str:
        clock = datetime.fromtimestamp(record.created).strftime('%H:%M:%S')
        name = record.name.removeprefix(PACKAGE_PREFIX)
        fields = ' '.join(f"{key}={self._number(value)}" for key, value in record_extras(record).items())
        line = f"{clock} {record.levelname:<5} [{name}] {record.getMessage()}"
        if fields:
            line = f"{line} {fields}"
        if record.exc_info:
            line = f"{line}\n{self.formatException(record.exc_info)}"
        return line

    @staticmethod
    def _number(value: Any) -> Any:
        if isinstance(value, float):
            return f"{value:.6g}"
        if isinstance(value, list) and all(isinstance(v, float) for v in value):
            return '[' + ', '.join(f"{v:.6g}" for v in value) + ']'
        return value


def setup_logging(
    json_format: Optional[bool] = None,
    level: Optional[str] = None,
    logger_name: Optional[str] = None,
) -> None:
    """Install a single stderr handler; unset arguments follow ISOPLATE_LOG_JSON and ISOPLATE_LOG_LEVEL."""
    current = Settings()
    if json_format is None:
        json_format = current.LOG_JSON
    numeric_level = getattr(logging, (level or current.LOG_LEVEL).upper(), logging.INFO)

    logger = logging.getLogger(logger_name)
    logger.setLevel(numeric_level)
    logger.handlers.clear()
    handler = logging.StreamHandler(sys.stderr)
    handler.setLevel(numeric_level)
    handler.setFormatter(JsonFormatter() if json_format else HumanFormatter())
    logger.addHandler(handler)
    if logger_name:
        logger.propagate = False


def get_logger(name: str) -> logging.Logger:
    return logging.getLogger(name)
