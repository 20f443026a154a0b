"""Logging for molguide: a Rich handler on stderr plus an optional file log.

Handlers are attached once to the package logger ``molguide``; module
loggers propagate to it, so the CLI adjusts verbosity in one place.
stdout is left to command output (summary tables, ``DrugIndex: ...``).
"""

import logging
from pathlib import Path

from rich.console import Console
from rich.logging import RichHandler

from molguide.utils.config import LOG_FILE, LOG_LEVEL

PACKAGE_LOGGER = "molguide"
CONSOLE_HANDLER = "console"
FILE_FORMAT = "%(asctime)s | %(levelname)-8s | %(name)s | %(message)s"


def _file_handler(path: str) -> logging.Handler | None:
    """DEBUG-level file log; None when ``path`` is empty or unwritable."""
    if not path:
        return None
    try:
        log_path = Path(path)
        log_path.parent.mkdir(parents=True, exist_ok=True)
        handler = logging.FileHandler(log_path, encoding="utf-8")
    except OSError:
        return None
    handler.setLevel(logging.DEBUG)
    handler.setFormatter(logging.Formatter(FILE_FORMAT, datefmt="%Y-%m-%d %H:%M:%S"))
    return handler


def _package_logger() -> logging.Logger:
    root = logging.getLogger(PACKAGE_LOGGER)
    if root.handlers:
        return root
    root.setLevel(logging.DEBUG)
    root.propagate = False

    console = RichHandler(
        level=LOG_LEVEL,
        rich_tracebacks=True,
        show_path=False,
        markup=False,
        console=Console(stderr=True),
    )
    console.set_name(CONSOLE_HANDLER)
    console.setFormatter(logging.Formatter("%(message)s"))
    root.addHandler(console)

    file_handler = _file_handler(LOG_FILE)
    if file_handler is not None:
        root.addHandler(file_handler)
    elif LOG_FILE:
        root.warning("Could not create log file at %s", LOG_FILE)
    return root


def get_logger(name: str) -> logging.Logger:
    """Logger for a module (pass ``__name__``), placed under the package logger."""
    _package_logger()
    if name != PACKAGE_LOGGER and not name.startswith(PACKAGE_LOGGER + "."):
        name = f"{PACKAGE_LOGGER}.{name}"
    return logging.getLogger(name)


def set_console_level(level: int | str) -> None:
    """Change stderr verbosity; the file log keeps everything at DEBUG."""
    for handler in _package_logger().handlers:
        if handler.get_name() == CONSOLE_HANDLER:
            handler.setLevel(level)


def console_level() -> int:
    for handler in _package_logger().handlers:
        if handler.get_name() == CONSOLE_HANDLER:
            return handler.level
    return logging.NOTSET
