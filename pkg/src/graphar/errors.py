"""Exception types shared across the package.

Plain ``ValueError`` is raised for rejected inputs (bad shapes, empty
samples, out-of-range parameters); the classes below cover the remaining
failure modes that callers may want to handle separately.
"""


class CapabilityError(Exception):
    """The requested operation is outside what this implementation supports.

    Raised e.g. for exact permutation search above the configured node cap,
    or for the closed-form mean under a correspondence where no closed form
    exists.
    """


class DatasetFormatError(ValueError):
    """A dataset, checkpoint or config file could not be parsed."""

    def __init__(self, message: str, record: int | None = None):
        if record is not None:
            message = f"record {record}: {message}"
        super().__init__(message)
        self.record = record


class NumericalError(ArithmeticError):
    """A numerical routine produced unusable values (singular system,
    non-finite intermediates)."""
