"""
Centralized logging configuration for the MP-QKD key-rate toolkit

Console lines go to stderr; stdout carries command results (breakdowns, CSV,
JSON) so they can be piped. An optional rotating log file receives either
plain lines or JSON lines with the structured fields below.
"""
import json
import logging
import logging.handlers
import sys
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, Optional

# Record attribute -> JSON key, copied from ``extra=`` into JSON log lines
STRUCTURED_FIELDS = {
    "operation": "operation",
    "duration": "duration_ms",
    "error_type": "error_type",
    "iteration": "iteration",
    "best_rate": "best_rate",
    "point": "point",
    "shard": "shard",
    "clicks": "clicks",
    "pairs": "pairs",
}

PLAIN_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


class JSONFormatter(logging.Formatter):
    """One JSON object per line"""

    def format(self, record):
        log_entry = {
            "timestamp": datetime.fromtimestamp(record.created).astimezone().isoformat(),
            "level": record.levelname,
            "logger": record.name,
            "message": record.getMessage(),
            "module": record.module,
            "function": record.funcName,
            "line": record.lineno,
        }

        for attr, key in STRUCTURED_FIELDS.items():
            if hasattr(record, attr):
                log_entry[key] = getattr(record, attr)

        if record.exc_info:
            log_entry["exception"] = self.formatException(record.exc_info)

        return json.dumps(log_entry, default=str)


class ColoredFormatter(logging.Formatter):
    """Console formatter, coloured by level when writing to a terminal"""

    COLORS = {
        'DEBUG': '\033[36m',    # Cyan
        'INFO': '\033[32m',     # Green
        'WARNING': '\033[33m',  # Yellow
        'ERROR': '\033[31m',    # Red
        'CRITICAL': '\033[35m', # Magenta
    }
    RESET = '\033[0m'

    def __init__(self, use_color: bool = True):
        super().__init__()
        self.use_color = use_color

    def format(self, record):
        timestamp = datetime.fromtimestamp(record.created).strftime('%H:%M:%S')
        line = f"[{timestamp}] {record.levelname:8} {record.name:24} | {record.getMessage()}"
        if self.use_color:
            line = f"{self.COLORS.get(record.levelname, '')}{line}{self.RESET}"

        if record.exc_info:
            line += f"\n{self.formatException(record.exc_info)}"

        return line


def setup_logging(
    log_level: str = "INFO",
    log_file: Optional[str] = None,
    enable_json_logging: bool = False,
    max_file_size: int = 10 * 1024 * 1024,  # 10MB
    backup_count: int = 5
) -> None:
    """
    Install the console handler and, optionally, a rotating file handler

    Args:
        log_level: Logging level (DEBUG, INFO, WARNING, ERROR, CRITICAL)
        log_file: Path to log file (optional); parent directories are created
        enable_json_logging: JSON lines instead of plain lines in the file
        max_file_size: Maximum size of log file before rotation
        backup_count: Number of rotated files to keep
    """
    numeric_level = getattr(logging, log_level.upper(), logging.INFO)

    root_logger = logging.getLogger()
    root_logger.setLevel(numeric_level)
    root_logger.handlers.clear()

    console_handler = logging.StreamHandler(sys.stderr)
    console_handler.setLevel(numeric_level)
    console_handler.setFormatter(ColoredFormatter(use_color=sys.stderr.isatty()))
    root_logger.addHandler(console_handler)

    if log_file:
        Path(log_file).parent.mkdir(parents=True, exist_ok=True)
        file_handler = logging.handlers.RotatingFileHandler(
            log_file,
            maxBytes=max_file_size,
            backupCount=backup_count,
            encoding='utf-8'
        )
        file_handler.setLevel(numeric_level)
        file_handler.setFormatter(JSONFormatter() if enable_json_logging else logging.Formatter(PLAIN_FORMAT))
        root_logger.addHandler(file_handler)

    logging.getLogger(__name__).debug(
        f"Logging configured - Level: {log_level}, File: {log_file or 'None'}, JSON: {enable_json_logging}"
    )


def get_logger(name: str) -> logging.Logger:
    """Logger for a module (pass __name__)"""
    return logging.getLogger(name)


def _field_summary(fields: Dict[str, Any]) -> str:
    parts = []
    for key, value in fields.items():
        if isinstance(value, float):
            parts.append(f"{key}={value:.4g}")
        else:
            parts.append(f"{key}={value}")
    return ", ".join(parts)


def log_operation(logger: logging.Logger, operation: str, duration_ms: Optional[float] = None, **kwargs):
    """
    Log a finished operation with structured data

    The message reads ``<operation> took 12.34ms (point=150, best_rate=2.9e-05)``;
    the same values travel in ``extra`` for the JSON formatter.

    Args:
        logger: Logger instance
        operation: Operation name (evaluate, sweep_point, oracle_shard, ...)
        duration_ms: Operation duration in milliseconds
        **kwargs: Additional structured fields
    """
    extra = {"operation": operation}
    if duration_ms is not None:
        extra["duration"] = duration_ms
    extra.update(kwargs)

    message = operation
    if duration_ms is not None:
        message += f" took {duration_ms:.2f}ms"
    if kwargs:
        message += f" ({_field_summary(kwargs)})"

    logger.info(message, extra=extra)


def log_progress(logger: logging.Logger, iteration: int, best_rate: float, **kwargs):
    """Periodic optimizer progress line"""
    extra = {"iteration": iteration, "best_rate": best_rate}
    extra.update(kwargs)
    logger.info(f"Iteration {iteration}: best rate {best_rate:.6e}", extra=extra)


def log_error(logger: logging.Logger, error: Exception, operation: str = None,
              traceback: bool = True, **kwargs):
    """
    Log a failure with structured data

    Args:
        logger: Logger instance
        error: Exception that occurred
        operation: Operation that failed (optional)
        traceback: Attach the traceback; off for expected failures that are
            recorded as a zero rate
        **kwargs: Additional structured fields
    """
    extra = {"error_type": type(error).__name__}
    if operation:
        extra["operation"] = operation
    extra.update(kwargs)

    if operation:
        message = f"Operation '{operation}' failed: {error}"
    else:
        message = f"Error: {error}"

    logger.error(message, exc_info=traceback, extra=extra)


def init_logging():
    """Initialize logging from the process settings"""
    try:
        from config import settings

        setup_logging(
            log_level=settings.LOG_LEVEL,
            log_file=settings.LOG_FILE,
            enable_json_logging=settings.ENABLE_JSON_LOGGING
        )
    except Exception as e:
        # Fallback to basic logging if configuration fails
        logging.basicConfig(level=logging.INFO, format=PLAIN_FORMAT, stream=sys.stderr)
        logging.getLogger(__name__).error(f"Failed to initialize logging configuration: {e}")
