"""structlog setup for the simulator

Library modules only call ``structlog.get_logger(__name__)``; the CLI and the
scripts call :func:`configure_logging` once at startup.
"""

import logging
import sys

import structlog

from pyhedonic.errors import ConfigError

_LEVELS = {
    "debug": logging.DEBUG,
    "info": logging.INFO,
    "warn": logging.WARNING,
    "warning": logging.WARNING,
    "error": logging.ERROR,
}


def configure_logging(level: str = "info", json: bool = False) -> None:
    try:
        numeric = _LEVELS[level.lower()]
    except KeyError:
        raise ConfigError(f"Unsupported log level {level}") from None

    renderer = (
        structlog.processors.JSONRenderer(sort_keys=True)
        if json
        else structlog.dev.ConsoleRenderer(colors=False)
    )
    structlog.configure(
        processors=[
            structlog.processors.add_log_level,
            structlog.processors.TimeStamper(fmt="iso"),
            renderer,
        ],
        wrapper_class=structlog.make_filtering_bound_logger(numeric),
        logger_factory=structlog.PrintLoggerFactory(file=sys.stderr),
        cache_logger_on_first_use=False,
    )
