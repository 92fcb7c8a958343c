"""
Logging configuration module for replictl.

This module sets up console and rotating file logging from the [logging]
section of the settings.
"""

import logging
import logging.handlers
from pathlib import Path
from typing import Any, Optional

DEFAULT_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
DEFAULT_LOG_FILE = "logs/replictl.log"

# Third-party loggers that are chatty at DEBUG
NOISY_LOGGERS = ["numba", "matplotlib"]


def _console_handler(level: int, formatter: logging.Formatter) -> logging.Handler:
    handler = logging.StreamHandler()
    handler.setLevel(level)
    handler.setFormatter(formatter)
    return handler


def setup_logging(settings: dict[str, Any], log_file_override: Optional[str] = None) -> None:
    """
    Set up logging configuration from settings.

    Args:
        settings: Settings dictionary; its "logging" section is used
        log_file_override: Optional path to override the log file location
    """
    logging_config = settings.get("logging", {})

    if not logging_config.get("enabled", True):
        logging.disable(logging.CRITICAL)
        return
    logging.disable(logging.NOTSET)

    log_level = getattr(logging, str(logging_config.get("level", "INFO")).upper(), logging.INFO)
    log_format = logging_config.get("format", DEFAULT_FORMAT)
    log_file_path = log_file_override or logging_config.get("file_path", DEFAULT_LOG_FILE)
    max_file_size = logging_config.get("max_file_size_mb", 10) * 1024 * 1024  # Convert MB to bytes
    backup_count = logging_config.get("backup_count", 5)
    console_enabled = logging_config.get("console_enabled", False)
    file_enabled = logging_config.get("file_enabled", True)

    root_logger = logging.getLogger()
    for handler in root_logger.handlers[:]:
        root_logger.removeHandler(handler)
        handler.close()
    root_logger.setLevel(log_level)

    formatter = logging.Formatter(log_format)
    handlers = []

    if console_enabled:
        handlers.append(_console_handler(log_level, formatter))
        root_logger.addHandler(handlers[-1])

    if file_enabled:
        try:
            Path(log_file_path).parent.mkdir(parents=True, exist_ok=True)
            file_handler = logging.handlers.RotatingFileHandler(log_file_path, maxBytes=max_file_size, backupCount=backup_count, encoding="utf-8")
            file_handler.setLevel(log_level)
            file_handler.setFormatter(formatter)
            handlers.append(file_handler)
            root_logger.addHandler(file_handler)
        except OSError as e:
            logging.error(f"Failed to set up file logging: {e}")
            if not console_enabled:
                handlers.append(_console_handler(log_level, formatter))
                root_logger.addHandler(handlers[-1])
                logging.warning("File logging failed and console was disabled - enabling console logging as fallback")

    if not handlers:
        root_logger.addHandler(_console_handler(log_level, formatter))
        logging.warning("No logging handlers configured - using console as fallback")

    for name in NOISY_LOGGERS:
        logging.getLogger(name).setLevel(logging.WARNING)

    logging.info(f"Logging configured - Level: {logging_config.get('level', 'INFO')}, Console: {console_enabled}, File: {file_enabled}")
    if file_enabled:
        logging.info(f"Log file: {log_file_path}")
