"""
utils/logger.py
Logging utilities for the toolkit
"""

import os
import logging
import datetime
from utils.path_utils import PathResolver
from config.app_config import APP_NAME, LOG_DIR, LOG_LEVEL, LOG_TO_FILE


def get_logger(name: str) -> logging.Logger:
    """Child of the application logger; handlers are attached by ``Logger`` only."""
    short = name.rsplit(".", 1)[-1] if name != "__main__" else "main"
    return logging.getLogger(f"{APP_NAME}.{short}")


class Logger:
    """Application logger with file and console output"""

    _initialized = False  # Prevent duplicate handlers

    def __init__(self, log_level=None, log_to_file=LOG_TO_FILE):
        if log_level is None:
            log_level = getattr(logging, LOG_LEVEL, logging.INFO)
        self.logger = logging.getLogger(f"{APP_NAME}")
        self.logger.setLevel(log_level)
        self.logger.propagate = False  # Avoid duplicate logs in console

        # Only initialize once
        if not Logger._initialized:
            formatter = logging.Formatter(
                '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
            )

            if log_to_file:
                log_dir = PathResolver.get_writable_path(LOG_DIR)
                PathResolver.ensure_directory(log_dir)
                timestamp = datetime.datetime.now().strftime("%Y%m%d_%H%M%S")
                self.log_file = os.path.join(log_dir, f"run_log_{timestamp}.log")

                file_handler = logging.FileHandler(self.log_file, encoding='utf-8')
                file_handler.setLevel(log_level)
                file_handler.setFormatter(formatter)
                self.logger.addHandler(file_handler)

            console_handler = logging.StreamHandler()
            console_handler.setLevel(log_level)
            console_handler.setFormatter(formatter)
            self.logger.addHandler(console_handler)

            Logger._initialized = True  # Prevent re-adding handlers

    def log_info(self, message):
        """Log info message"""
        self.logger.info(message)

    def log_error(self, message):
        """Log error message"""
        self.logger.error(message)

    def log_run_start(self, command, config_path):
        """Log the start of a CLI command"""
        self.log_info(f"==> Starting '{command}'")
        self.log_info(f"Config: {config_path}")

    def log_run_finish(self, command, success, elapsed_time):
        """Log command completion"""
        status = "SUCCESS" if success else "FAILED"
        self.log_info(f"<== {command} {status} in {elapsed_time:.2f} seconds")

    def log_exception(self, exception):
        """Log exception with traceback"""
        self.logger.exception(f"Exception occurred: {exception}")
