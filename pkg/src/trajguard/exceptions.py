"""Exception classes for trajguard"""

from typing import Optional


class TrajGuardError(Exception):
    """Base exception for all trajguard errors"""

    pass


class ConfigError(TrajGuardError):
    """Invalid or unknown configuration"""

    pass


class ShapeMismatchError(TrajGuardError):
    """Tensor shape does not match what a layer or model expects"""

    def __init__(self, message: str, layer: Optional[str] = None):
        self.layer = layer
        prefix = f"[{layer}] " if layer else ""
        super().__init__(f"{prefix}{message}")


class NonFiniteError(TrajGuardError):
    """NaN or Inf met where only finite values are allowed"""

    def __init__(self, message: str, location: Optional[str] = None):
        self.location = location
        prefix = f"[{location}] " if location else ""
        super().__init__(f"{prefix}{message}")


class TaskMismatchError(TrajGuardError):
    """Operation requested for the wrong task kind (classification/regression)"""

    pass


class CheckpointError(TrajGuardError):
    """Checkpoint container errors"""

    pass


class BadMagicError(CheckpointError):
    """File does not start with the container magic bytes"""

    pass


class VersionMismatchError(CheckpointError):
    """Container format version is not supported"""

    pass


class TruncatedCheckpointError(CheckpointError):
    """File ended before the declared content"""

    pass


class CheckpointShapeError(CheckpointError):
    """Stored tensors do not match the expected model layout"""

    pass


class MissingCheckpointError(CheckpointError):
    """An epoch snapshot is absent from a checkpoint set"""

    def __init__(self, epoch: int):
        self.epoch = epoch
        super().__init__(f"No checkpoint for epoch {epoch}")


class DatasetError(TrajGuardError):
    """Dataset lookup or synthesis errors"""

    pass


class DatasetFormatError(DatasetError):
    """Malformed dataset file"""

    pass


class AttackError(TrajGuardError):
    """Adversarial example crafting errors"""

    pass


class NoAdversarialStartError(AttackError):
    """Decision-based attack found no adversarial starting point"""

    pass


class DegenerateNormalizationError(AttackError):
    """Min-max normalization with Dist_max == Dist_min"""

    pass


class TrajectoryError(TrajGuardError):
    """Trajectory extraction errors"""

    pass


class InsufficientBenignError(TrajectoryError):
    """Not enough correctly classified examples for the benign pool"""

    def __init__(self, requested: int, available: int):
        self.requested = requested
        self.available = available
        self.deficit = requested - available
        super().__init__(
            f"Requested {requested} benign examples but only {available} are "
            f"correctly classified (deficit {self.deficit})"
        )


class IntensifierError(TrajGuardError):
    """Standardization, autoencoder or spectrum errors"""

    pass


class DetectorError(TrajGuardError):
    """One-class detector errors"""

    pass


class SvddCollapseError(DetectorError):
    """Mapping network collapsed onto the hypersphere center"""

    pass


class PipelineStageError(TrajGuardError):
    """A pipeline stage failed; wraps the original error with the stage name"""

    def __init__(self, stage: str, cause: BaseException):
        self.stage = stage
        self.cause = cause
        super().__init__(f"Stage '{stage}' failed: {cause}")


class ReportError(TrajGuardError):
    """Report emission or parsing errors"""

    pass
