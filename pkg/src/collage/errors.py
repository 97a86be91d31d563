"""Package-wide exception types.

Every error raised across stage boundaries derives from CollageError so the
CLI can map failures onto stable exit codes and a machine-readable stderr
payload.
"""

from __future__ import annotations


class CollageError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class ConfigurationError(CollageError):
    """Invalid configuration value, unknown key, or inconsistent settings."""

    exit_code = 2


class StageOrderError(CollageError):
    """A pipeline stage was invoked before the stages it depends on."""

    exit_code = 3


class FormatError(CollageError):
    """Malformed serialized artifact (dataset, checkpoint, cue cache)."""

    exit_code = 4


class TrainingError(CollageError):
    """Training diverged or hit non-finite losses."""

    exit_code = 5


class CheckpointMismatchError(CollageError):
    """Checkpoints from different upstream runs were combined."""

    exit_code = 6


class GeometryError(CollageError):
    """Geometric precondition violated (non-orthonormal frame, bad extents)."""

    exit_code = 7


class NumericError(CollageError):
    """Numerical failure inside a metric or estimator."""

    exit_code = 8
