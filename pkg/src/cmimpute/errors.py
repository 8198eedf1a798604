"""Exception types shared across the package.

Parsing and configuration problems subclass ValueError so callers that
treat bad input generically keep working; data-adequacy problems
subclass RuntimeError because the input was well formed but the
pipeline cannot proceed with it.
"""

from __future__ import annotations


class ParseError(ValueError):
    """A delimited-text row or header could not be interpreted."""


class SchemaError(ValueError):
    """A value or column contradicts the declared schema."""


class DecodeError(SchemaError):
    """A numeric value has no symbol under a categorical encoding."""


class ConfigError(ValueError):
    """A run or experiment configuration is invalid."""


class InsufficientDataError(RuntimeError):
    """Too little usable data to run the requested computation."""


class NoDonorsError(InsufficientDataError):
    """No complete records are available to donate values."""


class CannotClassifyError(RuntimeError):
    """Training data carries no labels to assign."""
