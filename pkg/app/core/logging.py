"""
Loguru setup shared by the CLI, the experiment harness and the tests.
"""

import json
import logging
import sys
from pathlib import Path
from types import FrameType
from typing import Any

from loguru import logger

from app.core.config.settings import settings

CONSOLE_FORMAT = (
    "<green>{time:HH:mm:ss.SSS}</green> | "
    "<level>{level: <8}</level> | "
    "<cyan>{name}</cyan>:<cyan>{line}</cyan> - "
    "<level>{message}</level>"
)

# Third-party loggers that flood DEBUG with font and backend chatter
QUIET_LOGGERS = ("matplotlib", "matplotlib.font_manager", "PIL")


class InterceptHandler(logging.Handler):
    """Forward records from stdlib ``logging`` (numpy, matplotlib) to loguru."""

    def emit(self, record: logging.LogRecord) -> None:
        level: str | int
        try:
            level = logger.level(record.levelname).name
        except ValueError:
            level = record.levelno

        # Walk out of the logging module so loguru reports the real caller
        frame: FrameType | None = logging.currentframe()
        depth = 2
        while frame and frame.f_code.co_filename == logging.__file__:
            frame = frame.f_back
            depth += 1

        logger.opt(depth=depth, exception=record.exc_info).log(level, record.getMessage())


class JsonFormatter:
    """One JSON object per record, with bound context flattened into the top level."""

    fields = ("level", "time", "message", "module", "function", "line")

    def __call__(self, record: dict[str, Any]) -> str:
        payload = {key: str(record[key]) for key in self.fields if key in record}
        payload.update({key: str(value) for key, value in record.get("extra", {}).items()})
        # loguru treats the returned string as a format template
        return json.dumps(payload).replace("{", "{{").replace("}", "}}") + "\n"


def setup_logging(level: str | None = None) -> None:
    """
    Replace loguru's default sink with the configured ones.

    Args:
        level: Overrides ``settings.LOG_LEVEL`` (the CLI ``--log-level`` flag).
    """
    logger.remove()
    log_level = (level or settings.LOG_LEVEL).upper()
    log_format: JsonFormatter | str = JsonFormatter() if settings.JSON_LOGS else CONSOLE_FORMAT

    logger.add(sys.stderr, format=log_format, level=log_level)  # type: ignore[arg-type]
    if settings.LOG_TO_FILE:
        log_path = Path(settings.LOG_FILE_PATH)
        log_path.parent.mkdir(parents=True, exist_ok=True)
        logger.add(
            log_path,
            rotation="10 MB",
            retention=5,
            format=log_format,  # type: ignore[arg-type]
            level=log_level,
        )

    logging.basicConfig(handlers=[InterceptHandler()], level=0, force=True)
    for name in QUIET_LOGGERS:
        logging.getLogger(name).setLevel(logging.WARNING)

    logger.debug(f"logging ready: level={log_level} json={settings.JSON_LOGS}")
