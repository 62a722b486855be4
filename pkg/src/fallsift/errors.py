"""Exception types shared across the package."""


class FallsiftError(Exception):
    """Base class for all package-specific errors."""


class ConfigurationError(FallsiftError, ValueError):
    """Invalid configuration or arguments (bad overlap, empty mix, ...)."""


class SchemaError(FallsiftError, ValueError):
    """A persisted file does not conform to the documented schema."""


class ShapeError(FallsiftError, ValueError):
    """Array dimensions do not match what an operation expects."""


class StateError(FallsiftError, RuntimeError):
    """Operation invoked before a required prior step (e.g. scaler not fitted)."""


class TrainingDivergedError(FallsiftError, RuntimeError):
    """Loss became non-finite during training."""

    def __init__(self, epoch: int, message: str | None = None):
        self.epoch = epoch
        super().__init__(message or f"training diverged at epoch {epoch}")


class MergeError(FallsiftError, ValueError):
    """Window identity collision while merging datasets."""
