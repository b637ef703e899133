import os
import sys
import logging
from datetime import datetime
from logging.handlers import RotatingFileHandler

from config.settings import LOG_CONFIG

# Resolve the log directory relative to the project root unless absolute
logs_dir = LOG_CONFIG["log_dir"]
if not os.path.isabs(logs_dir):
    logs_dir = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), logs_dir)
os.makedirs(logs_dir, exist_ok=True)

log_file = os.path.join(logs_dir, f'lab_{datetime.now().strftime("%Y%m%d")}.log')

root_logger = logging.getLogger()
root_logger.setLevel(getattr(logging, LOG_CONFIG["level"], logging.INFO))

if not getattr(root_logger, "_lab_configured", False):
    console_handler = logging.StreamHandler(sys.stderr)
    console_handler.setLevel(logging.INFO)
    console_handler.setFormatter(logging.Formatter('%(levelname)s - %(name)s - %(message)s'))

    file_handler = RotatingFileHandler(
        log_file,
        maxBytes=LOG_CONFIG["max_bytes"],
        backupCount=LOG_CONFIG["backup_count"],
        encoding='utf-8'
    )
    file_handler.setLevel(logging.DEBUG)
    file_handler.setFormatter(logging.Formatter('%(asctime)s - %(levelname)s - %(name)s - %(message)s'))

    root_logger.addHandler(console_handler)
    root_logger.addHandler(file_handler)
    root_logger._lab_configured = True


def get_logger(name):
    """
    Get a logger with the specified name.

    Args:
        name (str): The name of the logger, typically __name__ of the calling module.

    Returns:
        logging.Logger: A configured logger instance.
    """
    return logging.getLogger(name)


def set_verbose(verbose: bool = True):
    """Switch the root logger and console output between DEBUG and INFO."""
    level = logging.DEBUG if verbose else logging.INFO
    root_logger.setLevel(level)
    for handler in root_logger.handlers:
        if isinstance(handler, logging.StreamHandler) and not isinstance(handler, RotatingFileHandler):
            handler.setLevel(level)
