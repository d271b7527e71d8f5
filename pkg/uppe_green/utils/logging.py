import os
import sys
import tempfile
from loguru import logger

LOG_LEVELS = ["DEBUG", "INFO", "WARNING", "ERROR"]
LOG_FILE = os.path.join(tempfile.gettempdir(), "uppe_green.log")


def configure_logging(level: str = None, log_file: str = LOG_FILE, run_dir: str = None):
    """(Re)install the loguru sinks.

    The level comes from ``level`` or ``UPPE_GREEN_LOG_LEVEL``; unknown values
    fall back to INFO. When ``run_dir`` is given, a per-run ``run.log`` is
    written next to the experiment artifacts.
    """
    level = (level or os.getenv("UPPE_GREEN_LOG_LEVEL", "INFO")).upper()
    if level not in LOG_LEVELS:
        level = "INFO"

    logger.remove()

    # Check if sys.stderr is not None before adding it as a handler
    if sys.stderr is not None:
        logger.add(sys.stderr, level=level)

    if log_file:
        logger.add(log_file, rotation="5 MB", level=level)

    if run_dir:
        logger.add(os.path.join(run_dir, "run.log"), level=level, mode="w")

    return level


configure_logging()
