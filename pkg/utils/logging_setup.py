import logging
import os
import sys
from datetime import datetime

CONSOLE_FORMAT = '%(levelname)s:%(name)s:%(message)s'
FILE_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'


def setup_logging(name: str) -> logging.Logger:
    """Set up logging with a specified name.

    Console output goes to stderr so stdout stays free for results. A file
    handler is added only when NPH_LOG_DIR is set.
    """
    logger = logging.getLogger(name)
    level = getattr(logging, os.getenv('NPH_LOG_LEVEL', 'INFO').upper(), logging.INFO)
    logger.setLevel(level)

    if getattr(logger, '_nph_configured', False):
        return logger

    console_handler = logging.StreamHandler(sys.stderr)
    console_handler.setLevel(level)
    console_handler.setFormatter(logging.Formatter(CONSOLE_FORMAT))
    logger.addHandler(console_handler)

    log_dir = os.getenv('NPH_LOG_DIR')
    if log_dir:
        os.makedirs(log_dir, exist_ok=True)
        # logs/name_YYYY-MM-DD.log
        log_filename = os.path.join(log_dir, f"{name}_{datetime.now().strftime('%Y-%m-%d')}.log")
        file_handler = logging.FileHandler(log_filename, encoding='utf-8')
        file_handler.setLevel(level)
        file_handler.setFormatter(logging.Formatter(FILE_FORMAT))
        logger.addHandler(file_handler)

    logger.propagate = False
    logger._nph_configured = True
    return logger


if __name__ == "__main__":
    # Test run
    logger = setup_logging('test')
    logger.info("This is a test log message")
