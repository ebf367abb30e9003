import sys

from loguru import logger


def configure_logging(level: str = "INFO", json: bool = False) -> None:
    """Install a single stderr sink. JSON output when `json` is set."""
    logger.remove()
    if json:
        logger.add(sys.stderr, level=level.upper(), serialize=True)
    else:
        logger.add(
            sys.stderr,
            level=level.upper(),
            format="<green>{time:HH:mm:ss}</green> | <level>{level: <8}</level> | {name}:{function} - {message}",
        )
