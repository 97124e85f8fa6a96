"""Shared exception types.

The CLI maps these onto process exit codes: ConfigError and bad flags are
usage errors, DataError covers malformed or missing inputs, NumericalError
covers non-finite values detected at run time.
"""


class ZvqError(Exception):
    """Base class for all errors raised by this package."""


class ShapeError(ZvqError, ValueError):
    """An array argument has the wrong shape or an invalid dimension."""


class TapeError(ZvqError, RuntimeError):
    """Misuse of the autodiff tape (non-scalar loss, foreign tensor, ...)."""


class ConfigError(ZvqError, ValueError):
    """Invalid configuration value or unknown configuration key."""


class DataError(ZvqError, ValueError):
    """Malformed input data: bad file format, bad manifest, bad audio."""


class NumericalError(ZvqError, RuntimeError):
    """A non-finite value appeared where finite arithmetic was required."""
