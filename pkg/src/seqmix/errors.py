"""Exception types shared across the package."""


class SeqmixError(Exception):
    """Base class for all seqmix errors."""


class IngestionError(SeqmixError):
    """Raised when a raw log record cannot be parsed or violates the schema."""


class EstimationError(SeqmixError):
    """Raised when a model cannot be estimated from the given data."""


class ParameterError(SeqmixError):
    """Raised when a caller-supplied parameter is out of range or inconsistent."""


class NumericalError(SeqmixError):
    """Raised when a computation degenerates (e.g. a trace impossible under every component)."""
