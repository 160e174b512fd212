"""Error taxonomy shared by the library and the command-line front end."""


class LatentNetsError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(LatentNetsError):
    """Invalid, missing, or unknown configuration input."""


class DataError(LatentNetsError):
    """Malformed or inconsistent network data."""


class NumericalError(LatentNetsError):
    """Non-finite values or a failed numerical procedure."""
