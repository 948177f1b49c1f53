"""Exception types shared across the package."""


class FacefoolError(Exception):
    """Base class for every error this package raises deliberately."""


class PgmError(FacefoolError, ValueError):
    """Malformed PGM data: bad magic, bad header, or truncated payload."""


class DatasetError(FacefoolError, ValueError):
    """Invalid dataset layout, contents, or split parameters."""


class ModelError(FacefoolError, ValueError):
    """Invalid model state, model file, or training configuration."""


class OracleError(FacefoolError, RuntimeError):
    """Failure while querying a classifier oracle."""


class ProtocolError(OracleError):
    """The remote end violated the oracle wire protocol."""


class UsageError(FacefoolError, ValueError):
    """Bad command-line arguments."""
