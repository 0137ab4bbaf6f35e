"""
flexsim Logging

Text or JSON log output for the CLI and long-running studies.
"""

import logging
import sys
from typing import Optional

try:
    from pythonjsonlogger.json import JsonFormatter
except ImportError:  # python-json-logger < 3
    from pythonjsonlogger.jsonlogger import JsonFormatter


TEXT_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"
JSON_FORMAT = "%(asctime)s %(levelname)s %(name)s %(message)s"

_configured = False


def setup_logging(level: str = "INFO", fmt: str = "text", stream: Optional[object] = None) -> logging.Logger:
    """Configure the package logger once; later calls only adjust the level."""
    global _configured
    logger = logging.getLogger("flexsim")
    logger.setLevel(level)

    if _configured:
        return logger

    handler = logging.StreamHandler(stream or sys.stderr)
    if fmt == "json":
        handler.setFormatter(JsonFormatter(JSON_FORMAT))
    else:
        handler.setFormatter(logging.Formatter(TEXT_FORMAT))
    logger.addHandler(handler)
    logger.propagate = False
    _configured = True
    return logger
