"""Exception types shared across the toolkit."""


class LotsError(Exception):
    """Base class for all toolkit errors."""


class InvalidInputError(LotsError):
    """Caller supplied data that violates an operation's preconditions."""


class ConfigurationError(LotsError):
    """Model or pipeline components are wired together inconsistently."""


class SchemaError(LotsError):
    """A persisted artifact does not match its declared schema version.

    ``field`` names the offending entry when known.
    """

    def __init__(self, message: str, field: str | None = None):
        super().__init__(message)
        self.field = field


class NoWholeBodyItemsError(LotsError):
    """An image has parts to attach but no whole-body garment annotations."""


class OracleError(LotsError):
    """A remote embedding/VQA oracle call failed; carries the sample id."""

    def __init__(self, message: str, sample_id: str | None = None):
        super().__init__(message)
        self.sample_id = sample_id
