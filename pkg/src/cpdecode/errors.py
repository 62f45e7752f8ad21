"""Exception hierarchy shared across the package.

The CLI maps these onto process exit codes: configuration problems are
usage errors (1), anything wrong with the data itself is a data error (2),
and numerical breakdowns are reported separately (3).
"""


class CPDecodeError(Exception):
    """Base class for all package errors."""


class ConfigError(CPDecodeError):
    """Invalid configuration value (bad factor, band outside Nyquist, ...)."""


class DataError(CPDecodeError):
    """The input data cannot be processed as requested."""


class InvalidInputError(DataError):
    """Non-finite or mis-shaped numeric input."""


class MissingDataError(DataError):
    """A required field or key is absent; the message names it."""


class CorruptDataError(DataError):
    """File contents violate basic integrity (truncation, non-monotone time)."""


class SchemaError(DataError):
    """A container is missing required keys; the message lists them."""


class SchemaVersionError(SchemaError):
    """A container carries an unsupported version tag."""


class EmptyStreamError(DataError):
    """An operation produced or received zero packets."""


class EmptySelectionError(DataError):
    """A file/run selection matched nothing."""


class InsufficientDataError(DataError):
    """Too few samples for the requested operation."""


class NumericalError(CPDecodeError):
    """A numerical procedure failed beyond recovery."""


class UndefinedMetricError(NumericalError):
    """A metric is undefined for the given inputs (zero-energy denominator)."""
