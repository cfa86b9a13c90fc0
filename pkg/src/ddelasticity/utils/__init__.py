"""Shared utilities: logging and the exception hierarchy."""
from .exceptions import BaseDDError
from .logging import get_logger, logger, setup_logging

__all__ = ["BaseDDError", "get_logger", "logger", "setup_logging"]
