"""Logging utilities for gazekit."""

import logging
import sys
from pathlib import Path
from typing import Optional

import structlog

# Third-party loggers that are chatty at INFO during plotting and flow runs
_NOISY_LOGGERS = ("matplotlib", "PIL", "httpx", "prefect.client")


def setup_logging(
    level: str = "INFO",
    log_format: str = "console",
    log_file: Optional[str] = None
) -> None:
    """
    Set up structured logging for library code and the CLI.

    Args:
        level: Logging level (DEBUG, INFO, WARNING, ERROR)
        log_format: Format for logs ('json' or 'console')
        log_file: Optional path to log file
    """
    processors = [
        structlog.contextvars.merge_contextvars,
        structlog.stdlib.filter_by_level,
        structlog.stdlib.add_logger_name,
        structlog.stdlib.add_log_level,
        structlog.stdlib.PositionalArgumentsFormatter(),
        structlog.processors.TimeStamper(fmt="iso"),
        structlog.processors.StackInfoRenderer(),
        structlog.processors.format_exc_info,
        structlog.processors.UnicodeDecoder(),
    ]

    if log_format == "json":
        processors.append(structlog.processors.JSONRenderer(sort_keys=True))
    else:
        processors.append(structlog.dev.ConsoleRenderer(colors=False))

    structlog.configure(
        processors=processors,
        context_class=dict,
        logger_factory=structlog.stdlib.LoggerFactory(),
        wrapper_class=structlog.stdlib.BoundLogger,
        cache_logger_on_first_use=True,
    )

    numeric_level = getattr(logging, level.upper())

    # Logs go to stderr so that stdout stays clean for JSON results
    logging.basicConfig(
        format="%(message)s",
        stream=sys.stderr,
        level=numeric_level,
        force=True,
    )

    for name in _NOISY_LOGGERS:
        logging.getLogger(name).setLevel(max(numeric_level, logging.WARNING))

    if log_file:
        log_path = Path(log_file)
        log_path.parent.mkdir(parents=True, exist_ok=True)

        file_handler = logging.FileHandler(log_file)
        file_handler.setLevel(numeric_level)
        logging.getLogger().addHandler(file_handler)


def bind_run_context(**context: object) -> None:
    """Attach key/value context (command, fingerprint, ...) to every later log event."""
    structlog.contextvars.clear_contextvars()
    structlog.contextvars.bind_contextvars(**context)


def get_logger(name: str) -> structlog.stdlib.BoundLogger:
    """
    Get a structured logger instance.

    Args:
        name: Logger name (usually __name__)

    Returns:
        Configured logger instance
    """
    return structlog.get_logger(name)
