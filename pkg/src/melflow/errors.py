"""Error taxonomy shared across the package.

The CLI maps these onto exit codes: ConfigError -> 2, DataError (and the
model-file errors, which are data problems) -> 3, NumericError -> 4.
"""


class MelflowError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(MelflowError):
    """Invalid configuration: bad value, inconsistent dimensions, missing key."""


class DataError(MelflowError):
    """Malformed or incompatible input data."""


class NumericError(MelflowError):
    """Numeric failure: non-finite values where finite ones are required."""


class ModelFormatError(DataError):
    """Base class for model-artifact file problems."""


class ModelCorruptError(ModelFormatError):
    """Artifact file is truncated, has a bad magic string, or fails its checksum."""


class ModelVersionError(ModelFormatError):
    """Artifact file was written by an unsupported format version."""
