"""Logging setup: JSON records through python-json-logger, or plain text"""

import logging
import sys
from typing import Optional

from pythonjsonlogger import jsonlogger

from trajguard.constants import DEFAULT_LOG_LEVEL, LOG_FORMAT_JSON, LOG_FORMAT_TEXT

_JSON_FIELDS = "%(asctime)s %(levelname)s %(name)s %(message)s"
_TEXT_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


def configure_logging(
    level: str = DEFAULT_LOG_LEVEL,
    fmt: str = LOG_FORMAT_JSON,
    stream: Optional[object] = None,
) -> logging.Handler:
    """
    Install a single handler on the ``trajguard`` logger.

    Args:
        level: Log level name
        fmt: "json" or "text"
        stream: Output stream (stderr by default)

    Returns:
        The installed handler
    """
    if fmt not in (LOG_FORMAT_JSON, LOG_FORMAT_TEXT):
        raise ValueError(f"Unknown log format: {fmt}")

    handler = logging.StreamHandler(stream or sys.stderr)
    if fmt == LOG_FORMAT_JSON:
        handler.setFormatter(
            jsonlogger.JsonFormatter(
                _JSON_FIELDS,
                rename_fields={"asctime": "time", "levelname": "level", "name": "logger"},
            )
        )
    else:
        handler.setFormatter(logging.Formatter(_TEXT_FORMAT))

    root = logging.getLogger("trajguard")
    for existing in list(root.handlers):
        root.removeHandler(existing)
    root.addHandler(handler)
    root.setLevel(level.upper())
    root.propagate = False
    return handler
