"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes, so new error types should subclass
one of the three top branches (config, backend, exhaustion) rather than
raising bare exceptions.
"""

from __future__ import annotations


class DualSumError(Exception):
    """Base class for all package errors."""


class ConfigError(DualSumError):
    """Invalid configuration value or unusable config file."""


class DatasetError(DualSumError):
    """Malformed dataset or embedding file; message carries the location."""


class UnknownDocumentError(DualSumError):
    """Lookup of a doc id that does not exist in the queried pool."""


class DegenerateInputError(DualSumError):
    """Numerically unusable input (zero-norm vector, rank-deficient projection)."""


class PoolExhaustedError(DualSumError):
    """A selection asked for more documents than the unlabeled pool holds."""


class BackendError(DualSumError):
    """Base class for summarization backend failures."""


class TransportError(BackendError):
    """The backend could not be reached or returned a non-success status."""


class ProtocolError(BackendError):
    """The backend answered, but the payload violates the wire contract."""


class TrainingError(BackendError):
    """Fine-tuning was rejected or failed on the backend side."""
