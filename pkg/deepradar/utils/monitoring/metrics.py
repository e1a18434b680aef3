"""
Utility for recording toolkit metrics.
"""
import functools
import logging
import time
from pathlib import Path
from typing import Callable, Optional, Union

from prometheus_client import CollectorRegistry, Counter, Gauge, Histogram, write_to_textfile

logger = logging.getLogger(__name__)

# Dedicated registry so a run's textfile only holds toolkit metrics
REGISTRY = CollectorRegistry()

# Data generation metrics
FRAMES_GENERATED = Counter(
    'drs_frames_generated_total',
    'Total number of synthetic frames generated',
    registry=REGISTRY,
)

CLUTTER_POINTS = Counter(
    'drs_clutter_points_total',
    'Total number of clutter points placed by the oracle',
    registry=REGISTRY,
)

# Training metrics
OPTIMIZER_STEPS = Counter(
    'drs_optimizer_steps_total',
    'Total number of optimizer steps',
    ['network'],
    registry=REGISTRY,
)

EPOCH_DURATION = Histogram(
    'drs_epoch_duration_seconds',
    'Training epoch duration in seconds',
    ['variant'],
    buckets=(0.1, 0.5, 1.0, 2.5, 5.0, 10.0, 30.0, 60.0, 120.0, 300.0, 600.0),
    registry=REGISTRY,
)

EPOCH_LOSS = Gauge(
    'drs_epoch_loss',
    'Mean training loss of the latest epoch',
    ['variant'],
    registry=REGISTRY,
)

NON_FINITE_ABORTS = Counter(
    'drs_non_finite_aborts_total',
    'Total number of runs aborted on non-finite values',
    ['tensor'],
    registry=REGISTRY,
)

# Evaluation metrics
FRAMES_EVALUATED = Counter(
    'drs_frames_evaluated_total',
    'Total number of frames sampled during evaluation',
    ['variant'],
    registry=REGISTRY,
)

COMMAND_DURATION = Histogram(
    'drs_command_duration_seconds',
    'CLI command duration in seconds',
    ['command'],
    buckets=(0.1, 1.0, 5.0, 30.0, 60.0, 300.0, 900.0, 1800.0, 3600.0),
    registry=REGISTRY,
)

COMMAND_ERRORS = Counter(
    'drs_command_errors_total',
    'Total number of failed CLI commands',
    ['command', 'error_type'],
    registry=REGISTRY,
)


def track_duration(command: str) -> Callable:
    """
    Decorator to track how long a command takes and whether it failed.

    Args:
        command: Command label

    Returns:
        Decorator function
    """
    def decorator(func):
        @functools.wraps(func)
        def wrapper(*args, **kwargs):
            start_time = time.perf_counter()
            try:
                return func(*args, **kwargs)
            except Exception as e:
                COMMAND_ERRORS.labels(command=command, error_type=type(e).__name__).inc()
                raise
            finally:
                COMMAND_DURATION.labels(command=command).observe(time.perf_counter() - start_time)
        return wrapper
    return decorator


def record_epoch(variant: str, loss: float, duration_s: float) -> None:
    EPOCH_DURATION.labels(variant=variant).observe(duration_s)
    EPOCH_LOSS.labels(variant=variant).set(loss)


def write_metrics(path: Optional[Union[str, Path]]) -> None:
    """Write the registry in the Prometheus textfile format; no-op without a path."""
    if not path:
        return
    try:
        write_to_textfile(str(path), REGISTRY)
        logger.info(f"Wrote metrics to {path}")
    except OSError as e:
        logger.warning(f"Could not write metrics to {path}: {str(e)}")
