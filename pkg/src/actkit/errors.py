"""Typed error hierarchy shared by all actkit modules."""


class ActkitError(Exception):
    """Base class for every error actkit raises on bad input or bad data."""


class DomainError(ActkitError, ValueError):
    """A value is outside the domain an operation accepts (non-finite, out of range, empty)."""


class ShapeError(ActkitError, ValueError):
    """Array arguments have inconsistent or unsupported shapes."""


class FormatError(ActkitError, ValueError):
    """A serialized input (binary record stream, CSV, JSON) is malformed."""


class ConfigError(ActkitError, ValueError):
    """A preset name, selector, site id, or experiment config is invalid."""
