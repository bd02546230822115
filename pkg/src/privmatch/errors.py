"""Exception hierarchy shared across the toolkit."""


class PrivmatchError(Exception):
    """Base class for all toolkit errors."""


class ValidationError(PrivmatchError, ValueError):
    """Invalid argument, configuration or file content."""


class DimensionError(ValidationError):
    """Image or tensor dimensions violate an operation's contract."""


class FormatError(ValidationError):
    """Malformed serialized artifact (blob header, manifest, submission)."""


class PeriodLimitError(PrivmatchError):
    """Permutation period search exceeded the configured iteration cap."""
