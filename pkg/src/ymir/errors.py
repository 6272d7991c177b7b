"""Exception hierarchy shared by the whole package.

Every error raised on a contract violation derives from :class:`YmirError`.
The CLI maps ``exit_code`` onto process exit status (2 usage, 3 data,
4 numeric).
"""


class YmirError(Exception):
    exit_code = 1


class UsageError(YmirError):
    """Bad invocation or malformed configuration."""

    exit_code = 2


class DataError(YmirError):
    """Invalid, inconsistent, or insufficient input data."""

    exit_code = 3


class ParseError(DataError):
    """A file could not be parsed (bad header, bad cell, bad row)."""


class StructureError(DataError):
    """Structurally invalid series (empty, duplicate or non-uniform timestamps)."""


class AlignmentError(DataError):
    """A label timestamp does not match any data timestamp."""


class ShapeError(DataError):
    """Array dimensions do not match the declared contract."""


class SizeError(DataError):
    """A window or sample is larger than the available data."""


class ParameterError(DataError):
    """An out-of-range or unknown parameter value."""


class RegistryError(DataError):
    """Unknown or duplicate detector kind."""


class ContractError(DataError):
    """A caller or plugin violated an interface contract."""


class FitError(DataError):
    """A detector could not be fitted (usually too little training data)."""


class StreamError(DataError):
    """A streaming batch does not continue the stream uniformly."""


class ManifestError(DataError):
    """A persisted artifact is incompatible with the presented data."""


class NumericError(YmirError):
    """Non-finite values appeared where finite ones are required."""

    exit_code = 4
