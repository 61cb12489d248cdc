# multilayer_onn/utils/logger.py
# Purpose: Configure and provide logging utilities

"""
Logger utility for consistent JSON structured logging across the simulator.
"""

import logging
import uuid
from typing import Any, Dict, Optional

from pythonjsonlogger import jsonlogger


def setup_json_logger(name: str, level: str = "INFO", json_format: bool = True) -> logging.Logger:
    """
    Set up a JSON logger with the specified name and level.

    Args:
        name (str): The name of the logger.
        level (str): The logging level (e.g., 'DEBUG', 'INFO').
        json_format (bool): Emit JSON records; plain text when False.

    Returns:
        logging.Logger: Configured logger instance.
    """
    logger = logging.getLogger(name)
    logger.setLevel(getattr(logging, level.upper(), logging.INFO))

    # Clear existing handlers
    logger.handlers.clear()

    handler = logging.StreamHandler()
    if json_format:
        formatter = jsonlogger.JsonFormatter(
            fmt="%(asctime)s %(name)s %(levelname)s %(message)s",
            datefmt="%Y-%m-%dT%H:%M:%S"
        )
    else:
        formatter = logging.Formatter("%(asctime)s %(name)s %(levelname)s %(message)s")
    handler.setFormatter(formatter)
    logger.addHandler(handler)
    return logger


def get_logger(name: str) -> logging.Logger:
    """
    Get a logger instance.

    Args:
        name (str): The name of the logger.

    Returns:
        logging.Logger: Logger instance.
    """
    return logging.getLogger(name)


def generate_request_id() -> str:
    """
    Generate a unique run ID.

    Returns:
        str: Unique run ID.
    """
    return str(uuid.uuid4())[:8]


def log_stage_summary(stage: str, elapsed_time: float, run_id: Optional[str] = None, **fields: Any) -> None:
    """
    Log one summary record for a long-running stage.

    Args:
        stage (str): Stage name (e.g. 'train_epoch', 'raytrace').
        elapsed_time (float): Time taken in seconds.
        run_id (Optional[str]): Run ID for tracking.
        **fields: Extra structured fields (losses, counts, ...).
    """
    logger = get_logger(__name__)
    extra: Dict[str, Any] = {
        "stage": stage,
        "duration_ms": elapsed_time * 1000,
        "request_id": run_id or generate_request_id(),
    }
    extra.update(fields)
    logger.info("Stage %s finished in %.2f seconds", stage, elapsed_time, extra=extra)


def log_run_summary(command: str, duration: float, status: str, run_dir: str, run_id: Optional[str] = None) -> None:
    """
    Log a summary of a CLI run.

    Args:
        command (str): Command that was executed.
        duration (float): Total duration in seconds.
        status (str): 'success' or 'failure'.
        run_dir (str): Run directory holding the artifacts.
        run_id (Optional[str]): Run ID for tracking.
    """
    logger = get_logger(__name__)
    extra = {
        "command": command,
        "duration_ms": duration * 1000,
        "status": status,
        "run_dir": run_dir,
        "request_id": run_id or generate_request_id()
    }
    logger.info("Run %s %s in %.2f seconds", command, status, duration, extra=extra)
