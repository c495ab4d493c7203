class MaskfillError(Exception):
    """Base class for all the errors raised by maskfill."""


class ConfigError(MaskfillError):
    pass


class DataError(MaskfillError):
    pass


class LandmarkError(DataError):
    pass


class AlignmentError(DataError):
    pass


class EmptyHullError(DataError):
    pass


class EmptyDatasetError(DataError):
    pass


class ShapeError(MaskfillError, ValueError):
    pass


class CheckpointError(MaskfillError):
    pass


class CheckpointVersionError(CheckpointError):
    pass


class TrainingDivergedError(MaskfillError):
    """Raised when a loss turns non-finite; the run dir keeps the last state."""

    def __init__(self, message: str, checkpoint_path=None):
        super().__init__(message)
        self.checkpoint_path = checkpoint_path


class ScoreUndefinedError(MaskfillError, ValueError):
    pass


class ExtractorError(MaskfillError):
    pass


class RunLockedError(MaskfillError):
    pass
