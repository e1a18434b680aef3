"""
Exception hierarchy for the radar model toolkit.

Every error carries the process exit code the CLI reports for it:
2 usage/config, 3 I/O, 4 numeric failure.
"""
from typing import Optional


class DeepRadarError(Exception):
    """Base class for all toolkit errors."""
    exit_code: int = 1
    code: str = "error"


class ConfigError(DeepRadarError):
    """Invalid configuration, arguments or unknown keys."""
    exit_code = 2
    code = "config"


class ShapeError(ConfigError, ValueError):
    """Tensor shapes do not conform; the message names the offending dimension."""
    code = "shape"


class DataIOError(DeepRadarError):
    """Missing, unreadable or unwritable files."""
    exit_code = 3
    code = "io"


class DatasetHeaderError(DataIOError):
    """Bad magic or undecodable manifest."""
    code = "corrupt_header"


class DatasetVersionError(DataIOError):
    """Format version is not supported by this build."""
    code = "version_mismatch"


class TruncatedPayloadError(DataIOError):
    """File ends before the records the manifest promises."""
    code = "truncated_payload"


class ManifestError(DataIOError):
    """Manifest contents disagree with the stored records."""
    code = "manifest"


class CheckpointFormatError(DataIOError):
    """Checkpoint file is corrupt or its config hash does not verify."""
    code = "checkpoint_format"


class NumericError(DeepRadarError):
    """Numeric failure during a forward or backward pass."""
    exit_code = 4
    code = "numeric"


class DomainError(NumericError, ValueError):
    """Input outside an op's domain (e.g. log of a non-positive value)."""
    code = "domain"


class NonFiniteError(NumericError):
    """A tensor became NaN or infinite."""
    code = "non_finite"

    def __init__(self, tensor_name: str, message: Optional[str] = None):
        self.tensor_name = tensor_name
        super().__init__(message or f"non-finite values in tensor '{tensor_name}'")


class TrainingDivergedError(NumericError):
    """Training aborted because a loss or gradient became non-finite."""
    code = "diverged"

    def __init__(self, tensor_name: str, epoch: int, batch: int):
        self.tensor_name = tensor_name
        self.epoch = epoch
        self.batch = batch
        super().__init__(
            f"training diverged at epoch {epoch}, batch {batch}: "
            f"first non-finite tensor is '{tensor_name}'"
        )
