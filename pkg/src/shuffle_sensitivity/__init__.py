"""Batch-wise shuffle gates for field, dimension and embedding-entry selection."""

import logging

__version__ = "0.1.0"

logging.getLogger(__name__).addHandler(logging.NullHandler())


def configure_logging(level: int | str = logging.INFO) -> None:
    """
    Route package logs to stderr for CLI runs.

    ``level`` is a logging level or its name ("DEBUG", "INFO", ...). Training
    loops log per-step losses at DEBUG only.
    """
    if isinstance(level, str):
        level = logging.getLevelName(level.upper())
    logging.basicConfig(
        level=level,
        format="%(asctime)s %(levelname)-7s %(name)s: %(message)s",
        datefmt="%H:%M:%S",
    )
