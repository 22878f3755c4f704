"""Exception types shared across the package."""


class ChromagtError(Exception):
    """Base class for all package errors."""


class DatasetError(ChromagtError):
    """Malformed input data: bad JSON line or a graph invariant violation."""


class ConfigError(ChromagtError):
    """Inconsistent or incomplete configuration."""


class EncodingError(ChromagtError):
    """An input id falls outside the embedding vocabulary."""


class ShapeError(ChromagtError):
    """Tensor operands have incompatible shapes."""


class NumericalError(ChromagtError):
    """A non-finite value appeared where a finite one is required."""


class VersionError(ChromagtError):
    """A serialized artifact was written by an incompatible format version."""


class TrainingDiverged(ChromagtError):
    """Training loss became non-finite."""

    def __init__(self, epoch: int, message: str = ""):
        self.epoch = epoch
        super().__init__(message or f"training diverged at epoch {epoch}")
