import logging
import os
import sys
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional

# Centralized logger factory used across the project.
# Usage: from elastoscope.utils.log_handler import get_logger
#        logger = get_logger(__name__, source_file=__file__)
#
# Handlers follow LOG_DESTINATION:
#  - "stdout": stream handler on stderr (stdout carries CLI error JSON)
#  - "file":   daily file under <log root>/app or <log root>/tests
#  - "both":   both of the above
#
# File naming: <YYYY-MM-DD>-<file-name>.log (UTC date). The log root is
# ELASTOSCOPE_LOG_DIR when set, LOG_ROOT otherwise.
# CLI runs also mirror every package logger into <out>/run.log.
from elastoscope.config import LOG_DESTINATION, LOG_LEVEL, LOG_ROOT, RUN_LOG_NAME

_FORMAT = "%(asctime)sZ %(levelname)-8s %(name)s: %(message)s"

# every logger handed out by get_logger, by name
_loggers: dict[str, logging.Logger] = {}
# run-log handlers currently attached to all of them
_run_handlers: list[logging.Handler] = []


def _formatter() -> logging.Formatter:
    formatter = logging.Formatter(_FORMAT)
    formatter.converter = lambda *args: datetime.now(timezone.utc).timetuple()
    return formatter


def _log_root() -> Path:
    return Path(os.environ.get("ELASTOSCOPE_LOG_DIR", LOG_ROOT))


def _daily_file(name: str, source_file: Optional[str], for_tests: Optional[bool]) -> Path:
    if for_tests is None:
        for_tests = bool(source_file) and "elastoscope/tests" in Path(source_file).as_posix()
    basename = Path(source_file).name if source_file else name
    logs_dir = _log_root() / ("tests" if for_tests else "app")
    logs_dir.mkdir(parents=True, exist_ok=True)
    date_str = datetime.now(timezone.utc).strftime("%Y-%m-%d")
    return logs_dir / f"{date_str}-{basename.replace('.', '_')}.log"


def set_log_level(level: int) -> None:
    """Update the global level and re-level every logger and handler already handed out."""
    global LOG_LEVEL
    LOG_LEVEL = level
    for logger in _loggers.values():
        logger.setLevel(level)
        for handler in logger.handlers:
            handler.setLevel(level)


def get_logger(
    name: str,
    *,
    source_file: Optional[str] = None,
    for_tests: Optional[bool] = None,
    level: Optional[int] = None,
) -> logging.Logger:
    """
    Return a configured logger based on LOG_DESTINATION config.

    Parameters
    ----------
    name : str
        Logger name (typically __name__).
    source_file : str, optional
        Path to source file; names the daily logfile and tells test modules
        apart from library modules.
    for_tests : bool, optional
        Force test vs app mode. If None, inferred from source_file path.
    level : int, optional
        Log level (default: use global LOG_LEVEL).

    Returns
    -------
    logging.Logger
        Logger carrying the configured handlers plus any attached run log.
    """
    level = LOG_LEVEL if level is None else level
    logger = logging.getLogger(name)
    logger.setLevel(level)
    if name in _loggers:
        return logger

    logger.propagate = False
    formatter = _formatter()
    handlers: list[logging.Handler] = []
    if LOG_DESTINATION in ("stdout", "both"):
        handlers.append(logging.StreamHandler(sys.stderr))
    if LOG_DESTINATION in ("file", "both"):
        logfile = _daily_file(name, source_file, for_tests)
        handlers.append(logging.FileHandler(logfile, mode="a", encoding="utf-8"))
    for handler in handlers:
        handler.setLevel(level)
        handler.setFormatter(formatter)
        logger.addHandler(handler)
    for handler in _run_handlers:
        logger.addHandler(handler)

    _loggers[name] = logger
    return logger


def attach_run_log(out_dir: Path) -> logging.Handler:
    """Mirror every package logger into ``<out_dir>/run.log`` (overwritten per run)."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    handler = logging.FileHandler(out_dir / RUN_LOG_NAME, mode="w", encoding="utf-8")
    handler.setLevel(LOG_LEVEL)
    handler.setFormatter(_formatter())
    _run_handlers.append(handler)
    for logger in _loggers.values():
        logger.addHandler(handler)
    return handler


def detach_run_log(handler: logging.Handler) -> None:
    if handler in _run_handlers:
        _run_handlers.remove(handler)
    for logger in _loggers.values():
        logger.removeHandler(handler)
    handler.close()
