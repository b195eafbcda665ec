"""Exception types shared across the package."""


class ShapeError(ValueError):
    """Array dimensions are inconsistent with what an operation requires."""


class NumericError(ValueError):
    """An input or intermediate value is NaN or infinite."""


class FormatError(ValueError):
    """A file on disk does not conform to the expected binary/text layout."""


class ConfigError(ValueError):
    """A run configuration document is malformed or contains unknown keys."""
