"""
Logging for the solver.

One library logger, ``msf_solver``: plain messages on stderr (stdout carries
the check-matrix and convergence tables) and a timestamped rotating file in
``$MSF_LOG_DIR`` (default ``logs/``). Per-step messages go through
``StepLogAdapter`` so every line names the step and time it belongs to.
"""

import logging
import os
import sys
from dataclasses import dataclass
from logging.handlers import RotatingFileHandler
from pathlib import Path
from typing import Optional

LOGGER_NAME = "msf_solver"
LOG_FILE_NAME = "msf_solver.log"

CONSOLE_FORMAT = '%(message)s'
FILE_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'


@dataclass(frozen=True)
class LogSettings:
    level: str = "INFO"
    log_dir: str = "logs"
    log_to_file: bool = True
    max_bytes: int = 10 * 1024 * 1024
    backup_count: int = 5

    @classmethod
    def from_env(cls, verbose: bool = False, log_to_file: bool = True, default_level: str = "INFO") -> "LogSettings":
        level = "DEBUG" if verbose else os.getenv("MSF_LOG_LEVEL", default_level)
        return cls(level=level.upper(), log_dir=os.getenv("MSF_LOG_DIR", "logs"), log_to_file=log_to_file)

    @property
    def numeric_level(self) -> int:
        return getattr(logging, self.level, logging.INFO)


class StepLogAdapter(logging.LoggerAdapter):
    """Prefixes messages with ``[step k, t=...]``."""

    def process(self, msg, kwargs):
        return f"[step {self.extra['step']}, t={self.extra['t']:.6g}] {msg}", kwargs


def _console_handler(settings: LogSettings) -> logging.Handler:
    handler = logging.StreamHandler(sys.stderr)
    handler.setLevel(settings.numeric_level)
    handler.setFormatter(logging.Formatter(CONSOLE_FORMAT))
    return handler


def _file_handler(settings: LogSettings) -> logging.Handler:
    log_path = Path(settings.log_dir)
    log_path.mkdir(parents=True, exist_ok=True)
    handler = RotatingFileHandler(
        log_path / LOG_FILE_NAME,
        maxBytes=settings.max_bytes,
        backupCount=settings.backup_count,
        encoding='utf-8'
    )
    # Newton iterations always reach the file
    handler.setLevel(logging.DEBUG)
    handler.setFormatter(logging.Formatter(FILE_FORMAT, datefmt='%Y-%m-%d %H:%M:%S'))
    return handler


def setup_logger(settings: LogSettings, name: str = LOGGER_NAME) -> logging.Logger:
    """
    Configure ``name`` from scratch according to ``settings``.

    Existing handlers are closed and replaced, so calling this twice (first
    console-only from library code, then with a file from the CLI) leaves
    exactly one set of handlers.
    """
    logger = logging.getLogger(name)
    for handler in list(logger.handlers):
        logger.removeHandler(handler)
        handler.close()

    logger.setLevel(logging.DEBUG if settings.log_to_file else settings.numeric_level)
    logger.propagate = False
    logger.addHandler(_console_handler(settings))
    if settings.log_to_file:
        file_handler = _file_handler(settings)
        logger.addHandler(file_handler)
        logger.debug(f"Logging to: {file_handler.baseFilename}")
    return logger


_library_logger: Optional[logging.Logger] = None


def init_library_logger(verbose: bool = False, log_to_file: bool = True) -> logging.Logger:
    """
    Initialize the library-wide logger.

    Args:
        verbose: DEBUG on the console; otherwise $MSF_LOG_LEVEL (default INFO)
        log_to_file: Whether to also write logs/msf_solver.log

    Returns:
        Configured logger
    """
    global _library_logger
    _library_logger = setup_logger(LogSettings.from_env(verbose=verbose, log_to_file=log_to_file))
    return _library_logger


def get_library_logger() -> logging.Logger:
    """Library logger; console-only at WARNING unless the CLI initialized it."""
    global _library_logger
    if _library_logger is None:
        _library_logger = setup_logger(LogSettings.from_env(log_to_file=False, default_level="WARNING"))
    return _library_logger


def step_logger(step: int, t: float) -> StepLogAdapter:
    return StepLogAdapter(get_library_logger(), {"step": step, "t": t})
