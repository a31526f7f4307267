"""Error types shared across the package."""


class ShapeError(ValueError):
    """Input arrays do not conform to the shape an operation requires."""


class ConfigError(ValueError):
    """A configuration value is outside its legal range."""


class FormatError(ValueError):
    """A serialized container is malformed or has the wrong magic/version."""


class LayoutError(FileNotFoundError):
    """A dataset root does not follow the expected directory layout."""
