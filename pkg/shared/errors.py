"""Error hierarchy shared by every package of the lab"""
import logging
from typing import Optional, Dict, Any, List

logger = logging.getLogger(__name__)


class PinnLabError(Exception):
    """Base exception class for lab errors"""

    def __init__(self, message: str, error_code: Optional[str] = None, details: Optional[Dict[str, Any]] = None):
        self.message = message
        self.error_code = error_code or self.__class__.__name__
        self.details = details or {}
        super().__init__(self.message)

    def to_dict(self) -> Dict[str, Any]:
        """Convert to a structured error payload"""
        return {
            "message": self.message,
            "error_code": self.error_code,
            "details": self.details,
        }


class ConfigurationError(PinnLabError):
    """Raised when a configuration value is invalid or missing"""

    def __init__(self, message: str, field: Optional[str] = None, value: Any = None):
        super().__init__(
            message,
            error_code="CONFIGURATION_ERROR",
            details={"field": field, "value": value} if field else {},
        )


class UsageError(PinnLabError):
    """Raised when an API is called with inconsistent arguments"""

    def __init__(self, message: str, expected: Any = None, actual: Any = None):
        details = {}
        if expected is not None or actual is not None:
            details = {"expected": expected, "actual": actual}
        super().__init__(message, error_code="USAGE_ERROR", details=details)


class UnsupportedError(PinnLabError):
    """Raised when an operation is not defined for the given problem"""

    def __init__(self, message: str, problem: Optional[str] = None):
        super().__init__(
            message,
            error_code="UNSUPPORTED",
            details={"problem": problem} if problem else {},
        )


class OracleError(PinnLabError):
    """Raised when a reference solver or quadrature fails its own checks"""

    def __init__(self, message: str, oracle: str, residual: Optional[float] = None):
        super().__init__(
            message,
            error_code="ORACLE_FAILURE",
            details={"oracle": oracle, "residual": residual},
        )
        self.oracle = oracle
        self.residual = residual


class DivergenceError(PinnLabError):
    """Raised when training produces non-finite losses or gradients"""

    def __init__(self, message: str, iteration: int, history: Optional[List[Any]] = None):
        super().__init__(
            message,
            error_code="DIVERGENCE",
            details={"iteration": iteration},
        )
        self.iteration = iteration
        self.history = history or []


def handle_error(error: Exception) -> Dict[str, Any]:
    """Convert any exception to the structured error payload"""
    if isinstance(error, PinnLabError):
        return error.to_dict()

    if isinstance(error, ValueError):
        return UsageError(str(error)).to_dict()

    return PinnLabError(f"Unexpected error: {str(error)}").to_dict()


def log_and_raise_error(error: Exception, context: str = "") -> None:
    """Log error with context and re-raise"""
    if context:
        logger.error(f"{context}: {error}")
    else:
        logger.error(f"Error: {error}")

    if logger.isEnabledFor(logging.DEBUG):
        import traceback
        logger.debug(f"Stack trace: {traceback.format_exc()}")

    raise error
