import sys

from loguru import logger

LOG_FORMAT = (
    "<green>{time:HH:mm:ss.SSS}</green> | <level>{level: <8}</level> | "
    "{name}:{function} - <level>{message}</level>"
)


def setup_logging(level: str = "INFO") -> None:
    """Route loguru output to a single stderr sink"""
    logger.remove()
    logger.add(sys.stderr, level=level.upper(), format=LOG_FORMAT)
