"""Exception hierarchy shared by every module.

Each error class carries the process exit code the CLI maps it to, so the
command layer never needs a lookup table.
"""


class LidarSrError(Exception):
    """Base class for all errors raised by this package."""

    exit_code = 1


class SelfcheckError(LidarSrError):
    """One or more built-in oracles failed."""


class ParseError(LidarSrError):
    """A file could not be decoded (truncated records, bad syntax)."""

    exit_code = 2


class InputError(LidarSrError):
    """Well-formed call with semantically invalid data (non-finite
    coordinates, shape mismatch, empty cloud where one is required)."""

    exit_code = 2


class ConfigError(LidarSrError):
    """Invalid configuration: calibration, window shape, network config,
    missing or inconsistent options."""

    exit_code = 3


class NumericalError(LidarSrError):
    """A computation produced non-finite values."""

    exit_code = 4


class WeightsError(LidarSrError):
    """Problems with a weight file (corruption or incompatibility)."""

    exit_code = 5


class WeightCorruptionError(WeightsError):
    """Weight file failed its checksum or is structurally damaged."""


class WeightMismatchError(WeightsError):
    """Weight file is intact but does not match the network config."""
