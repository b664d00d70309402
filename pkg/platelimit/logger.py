"""Logging setup for platelimit runs.

The console follows the requested level. The optional log file always records
DEBUG, so the per-iteration interior-point trace of a run is kept on disk even
when the console shows INFO only.
"""

import logging
import re
import sys
from logging import FileHandler, Handler, StreamHandler
from pathlib import Path
from typing import List, Optional

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
ANSI_ESCAPE = re.compile(r"\x1b\[[0-9;]*m")

_installed: List[Handler] = []


class PlainFormatter(logging.Formatter):
    """Formatter for log files: strips the colorama codes of console messages."""

    def format(self, record: logging.LogRecord) -> str:
        return ANSI_ESCAPE.sub("", super().format(record))


def setup_logging(level: int = logging.INFO, log_file: Optional[Path] = None) -> None:
    """Install the console handler (and a DEBUG file handler) on the root logger.

    Calling it again replaces the handlers of the previous call and leaves
    handlers installed by anyone else alone.
    """
    root = logging.getLogger()
    while _installed:
        handler = _installed.pop()
        root.removeHandler(handler)
        handler.close()

    console = StreamHandler(sys.stdout)
    console.setLevel(level)
    console.setFormatter(logging.Formatter(LOG_FORMAT))
    _installed.append(console)

    if log_file:
        file_handler = FileHandler(log_file, mode="w", encoding="utf-8")
        file_handler.setLevel(logging.DEBUG)
        file_handler.setFormatter(PlainFormatter(LOG_FORMAT))
        _installed.append(file_handler)

    for handler in _installed:
        root.addHandler(handler)
    root.setLevel(logging.DEBUG if log_file else level)


def get_logger(name: str) -> logging.Logger:
    """Get a logger with the specified name."""
    return logging.getLogger(name)
