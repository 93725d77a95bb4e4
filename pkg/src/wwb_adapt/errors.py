"""Exception hierarchy shared across the package and the CLI."""


class WwbAdaptError(Exception):
    """Base class for all package errors."""


class ConfigError(WwbAdaptError):
    """Invalid configuration, flags, or input files."""


class VersionError(ConfigError):
    """Persisted artifact (LUT or model file) has an unsupported version."""


class NumericError(WwbAdaptError):
    """Numerical failure during bound evaluation, optimization, or training."""


class DegenerateBeliefError(NumericError):
    """No valid test point exists for the given belief."""
