"""
utils/errors.py
Exception types raised across the toolkit.
"""


class FairPrepError(Exception):
    """Base class for every error the toolkit raises on purpose."""


class ShapeError(FairPrepError, ValueError):
    """Array dimensions do not chain or do not match."""


class StateError(FairPrepError, RuntimeError):
    """An operation was called out of order (e.g. backward without forward)."""


class ParameterError(FairPrepError, ValueError):
    """A scalar argument is outside its admissible range."""


class InputError(FairPrepError, ValueError):
    """Data handed to an operation violates its contract."""


class MetricError(FairPrepError, ValueError):
    """A metric is undefined on the given inputs."""


class DataLoadError(FairPrepError):
    """A dataset file could not be read against its schema."""

    def __init__(self, message, row=None, column=None):
        location = []
        if row is not None:
            location.append(f"row {row}")
        if column is not None:
            location.append(f"column '{column}'")
        if location:
            message = f"{message} ({', '.join(location)})"
        super().__init__(message)
        self.row = row
        self.column = column


class FitError(FairPrepError):
    """A downstream model cannot be fitted on the given data."""


class TrainingDivergedError(FairPrepError):
    """A training loss became NaN; ``snapshot`` holds the state at failure."""

    def __init__(self, message, snapshot=None):
        super().__init__(message)
        self.snapshot = snapshot or {}


class IntegrityError(FairPrepError):
    """A checkpoint file does not match the digest recorded in its manifest."""
