import logging
import os
import sys
from datetime import datetime
from typing import Optional

LOG_FORMAT = '[%(asctime)s] [%(name)s/%(levelname)s]: %(message)s'
DATE_FORMAT = '%H:%M:%S'


class CustomFormatter(logging.Formatter):
    """Custom formatter to shorten logger names in log messages"""
    def format(self, record):
        name = record.name
        if name.startswith("__"):
            name = name.upper().replace("__", "")
        elif "." in name:
            last_part = name.split(".")[-1]
            name = last_part[0].upper() + last_part[1:]
        elif name:
            name = name[0].upper() + name[1:]

        original = record.name
        record.name = name
        try:
            return super().format(record)
        finally:
            record.name = original


class LoggerService:
    def __init__(self, package_name, log_directory: Optional[str] = None, log_level=logging.INFO):
        """
        Initializes the LoggerService class
        :param package_name: Name of the logger (usually __name__)
        :param log_directory: Directory where daily log files are stored; None logs to stderr only
        :param log_level: Logging level (e.g., logging.INFO, logging.DEBUG)
        """
        self.package_name = package_name
        self.log_directory = log_directory
        self.log_level = log_level
        self.log_filename = None
        if log_directory:
            self.log_filename = os.path.join(log_directory, f"{datetime.now().strftime('%Y-%m-%d')}.log")
            os.makedirs(self.log_directory, exist_ok=True)

        self._setup_logger()

    def _setup_logger(self):
        """Sets up the logging configuration"""
        handlers = [logging.StreamHandler()]
        if self.log_filename:
            handlers.append(logging.FileHandler(self.log_filename))

        # force=True so a second service (e.g. with a log directory) replaces the first setup
        logging.basicConfig(level=self.log_level, handlers=handlers, force=True)

        for handler in logging.getLogger().handlers:
            handler.setFormatter(CustomFormatter(LOG_FORMAT, datefmt=DATE_FORMAT))

    def install_exception_hook(self):
        """Sets up a handler for uncaught exceptions"""
        def log_uncaught_exceptions(exc_type, exc_value, exc_tb):
            if issubclass(exc_type, KeyboardInterrupt):
                self.get_logger().info("Interrupted by user")
                sys.__excepthook__(exc_type, exc_value, exc_tb)
                return
            self.get_logger().error("Uncaught exception", exc_info=(exc_type, exc_value, exc_tb))

        sys.excepthook = log_uncaught_exceptions

    def get_logger(self):
        """Returns the logger instance for the specified package"""
        return logging.getLogger(self.package_name)


def get_logger(name: str) -> logging.Logger:
    """Library modules log through here and leave handler setup to LoggerService."""
    return logging.getLogger(name)
