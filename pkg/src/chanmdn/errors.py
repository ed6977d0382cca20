"""Exception types shared across the package."""


class ChanMdnError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(ChanMdnError):
    """Invalid or inconsistent configuration."""


class DataFormatError(ChanMdnError):
    """Malformed or unsupported on-disk document."""


class TrainingError(ChanMdnError):
    """Training could not complete (e.g. restart budget exhausted)."""
