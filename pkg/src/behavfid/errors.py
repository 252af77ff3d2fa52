"""Exception hierarchy shared across the package.

The CLI maps these onto stable exit codes (see cli.EXIT_CODES):
config/schema problems -> 2, insufficient data -> 3, baseline
fingerprint mismatch -> 4, schema/pattern incompatibility -> 5.
"""


class BehavfidError(Exception):
    """Base class for all package errors."""


class ConfigError(BehavfidError):
    """Bad configuration: missing files, malformed schema/rule files, bad flags."""


class SchemaError(ConfigError):
    """Schema does not match the data: missing columns, conflicting roles, bad values."""


class InsufficientDataError(BehavfidError):
    """The data cannot support the requested computation (e.g. no fraud entities)."""


class FingerprintMismatchError(BehavfidError):
    """A baseline was computed on a different dataset than the one supplied."""


class PatternUnavailableError(BehavfidError):
    """A requested pattern cannot be computed with the given schema/tables."""
