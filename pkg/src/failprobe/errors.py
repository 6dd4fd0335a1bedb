"""Exception types shared across the pipeline."""


class FailprobeError(Exception):
    """Base class for all pipeline errors."""


class DataValidationError(FailprobeError):
    """Malformed or inconsistent input data (CSV rows, config values, keys)."""


class StoreFormatError(DataValidationError):
    """Embedding store file violates the EHRE v1 binary format."""


class MissingEmbeddingError(FailprobeError):
    """An original bucket has no vector in the store; extraction run is incomplete."""


class MissingClassError(FailprobeError):
    """A train split ended up with only one outcome class."""


class NumericalError(FailprobeError):
    """Training produced a non-finite loss."""
