"""Logging module for singtraj."""
import logging
import sys
from typing import Optional
import json

from .storage import Database, CacheError


class RunLogger:
    """Handles logging of CLI runs to the cache database."""
    def __init__(self, db: Optional[Database]):
        self.db = db
        self.logger = logging.getLogger(__name__)

    def log_run(self,
                command: str,
                details: Optional[dict] = None) -> None:
        """
        Log a command run to the database.

        Args:
            command: CLI command name
            details: Optional dictionary of additional details
        """
        if self.db is None:
            return
        try:
            details_json = json.dumps(details, sort_keys=True, default=str) if details else None

            query = """
            INSERT INTO run_log (command, details)
            VALUES (?, ?)
            """
            self.db.execute(query, (command, details_json))
            self.db.commit()

            self.logger.info(f"Run logged - Command: {command}")
        except CacheError as e:
            self.logger.error(f"Failed to log run: {e}")
            # Don't raise - logging should not interrupt main flow


def setup_logging(log_file: Optional[str], log_format: str, level: str = "INFO") -> None:
    """
    Set up application-wide logging configuration.

    Args:
        log_file: Path to the log file, or None for console only
        log_format: Format string for log messages
        level: Logging level name
    """
    handlers: list = [logging.StreamHandler(sys.stderr)]  # stdout carries reports
    if log_file:
        handlers.insert(0, logging.FileHandler(log_file))
    logging.basicConfig(
        level=getattr(logging, level.upper(), logging.INFO),
        format=log_format,
        handlers=handlers,
        force=True
    )
