"""
Centralized error handling utilities and standardized error responses
"""
from typing import Dict, Any, Optional, Tuple

from pydantic import ValidationError

from utils.logging_config import get_logger, log_error

logger = get_logger(__name__)

# Process exit codes shared by every subcommand
EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_USAGE = 2


class KeyRateToolkitError(Exception):
    """Base exception class for the key-rate toolkit"""

    def __init__(self, message: str, error_code: str = None, details: Dict[str, Any] = None):
        self.message = message
        self.error_code = error_code or self.__class__.__name__
        self.details = details or {}
        super().__init__(self.message)


class ConfigurationError(KeyRateToolkitError):
    """Exception for missing or malformed configuration and usage errors"""
    pass


class ParameterValidationError(KeyRateToolkitError):
    """Exception for source-parameter vectors violating their invariants"""
    pass


class DegenerateChannelError(KeyRateToolkitError):
    """Raised when the average response probability underflows to zero"""
    pass


class EstimatorDegenerateError(KeyRateToolkitError):
    """Raised when the decoy estimator cannot produce a positive yield"""
    pass


class ProtocolAbortError(KeyRateToolkitError):
    """Raised when an estimated error rate leaves no extractable key"""
    pass


class OracleMismatchError(KeyRateToolkitError):
    """Raised when the Monte Carlo oracle disagrees with the analytic model"""
    pass


def create_error_response(
    error_code: str,
    message: str,
    exit_code: int = EXIT_USAGE,
    details: Optional[Dict[str, Any]] = None
) -> Dict[str, Any]:
    """
    Create a standardized error response

    Args:
        error_code: Unique error code
        message: Human-readable error message
        exit_code: Process exit code the command will return
        details: Additional error details

    Returns:
        Standardized error response dictionary
    """
    error_response = {
        "success": False,
        "error": {
            "code": error_code,
            "message": message,
            "exit_code": exit_code
        }
    }

    if details:
        error_response["error"]["details"] = details

    return error_response


def exit_code_for(error: Exception) -> int:
    """Map an exception onto the command-line exit code contract"""
    status_mapping = {
        ConfigurationError: EXIT_USAGE,
        ParameterValidationError: EXIT_USAGE,
        OracleMismatchError: EXIT_CHECK_FAILED,
        DegenerateChannelError: EXIT_CHECK_FAILED,
        EstimatorDegenerateError: EXIT_CHECK_FAILED,
        ProtocolAbortError: EXIT_CHECK_FAILED,
    }
    if isinstance(error, ValidationError):
        return EXIT_USAGE
    return status_mapping.get(type(error), EXIT_CHECK_FAILED)


def handle_validation_error(error: ValidationError) -> Dict[str, Any]:
    """
    Convert a pydantic validation error into an error response

    Every failing field is listed with the message of the violated invariant.
    """
    log_error(logger, error, operation="config validation")

    validation_errors = []
    for err in error.errors():
        validation_errors.append({
            "field": ".".join(str(x) for x in err["loc"]),
            "message": err["msg"],
            "type": err["type"]
        })

    return create_error_response(
        "VALIDATION_ERROR",
        "Configuration validation failed",
        EXIT_USAGE,
        details={"validation_errors": validation_errors}
    )


def handle_service_error(error: KeyRateToolkitError) -> Dict[str, Any]:
    """Convert a toolkit exception into an error response"""
    log_error(logger, error, operation="service operation")

    return create_error_response(
        error.error_code,
        error.message,
        exit_code_for(error),
        details=error.details
    )


def handle_generic_error(error: Exception, operation: str = "operation") -> Dict[str, Any]:
    """Convert an unexpected exception into an error response"""
    log_error(logger, error, operation=operation)

    return create_error_response(
        "INTERNAL_ERROR",
        f"An unexpected error occurred: {error}",
        EXIT_CHECK_FAILED,
        details={"operation": operation}
    )


def safe_execute(func, *args, operation: str = None, **kwargs) -> Tuple[int, Any]:
    """
    Safely execute a command function with error handling

    Args:
        func: Function returning ``(exit_code, payload)``
        *args: Function arguments
        operation: Operation description for logging
        **kwargs: Function keyword arguments

    Returns:
        ``(exit_code, payload)``; on failure the payload is an error response
    """
    try:
        return func(*args, **kwargs)
    except KeyRateToolkitError as e:
        return exit_code_for(e), handle_service_error(e)
    except ValidationError as e:
        return EXIT_USAGE, handle_validation_error(e)
    except Exception as e:
        return EXIT_CHECK_FAILED, handle_generic_error(e, operation or "operation")
