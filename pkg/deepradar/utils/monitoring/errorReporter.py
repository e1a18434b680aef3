"""
Error reporting utility for the command-line tools.
"""
import logging
import traceback
from typing import Any, Dict, Optional

from deepradar.errors import DeepRadarError, NonFiniteError, TrainingDivergedError
from deepradar.utils.monitoring.metrics import NON_FINITE_ABORTS

logger = logging.getLogger(__name__)

UNEXPECTED_EXIT_CODE = 1


def capture_exception(exception: Exception, context: Optional[Dict[str, Any]] = None) -> int:
    """
    Log an exception with its context and map it to a process exit code.

    Toolkit errors are expected failures and are logged without a traceback;
    anything else is logged with one.

    Args:
        exception: The exception to report
        context: Additional context data (command, paths, seed)

    Returns:
        Exit code for the exception
    """
    if not context:
        context = {}

    if isinstance(exception, (NonFiniteError, TrainingDivergedError)):
        NON_FINITE_ABORTS.labels(tensor=exception.tensor_name).inc()

    if isinstance(exception, DeepRadarError):
        logger.error(f"{exception.code}: {str(exception)} | context: {context}")
        return exception.exit_code

    logger.error(
        f"Exception: {str(exception)}\nTraceback: {traceback.format_exc()}\nContext: {context}"
    )
    return UNEXPECTED_EXIT_CODE


def capture_message(message: str, context: Optional[Dict[str, Any]] = None, level: str = "info") -> None:
    """
    Log a message with context.

    Args:
        message: The message to report
        context: Additional context data
        level: Log level (error, warning, info)
    """
    if not context:
        context = {}
    log_method = getattr(logger, level, logger.info)
    log_method(f"{message} | context: {context}")
