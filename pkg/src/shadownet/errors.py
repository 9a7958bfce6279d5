"""Exception types shared across the package.

Invalid arguments raise plain ``ValueError``; the subclasses below carry
extra context for configuration and file-format problems.
"""


class ConfigError(ValueError):
    """Bad run configuration. ``key`` names the offending entry."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


class FormatError(ValueError):
    """Malformed binary or text input, located by byte offset."""

    def __init__(self, message: str, offset: int, path=None):
        where = f"{path}: " if path is not None else ""
        super().__init__(f"{where}{message} (at byte offset {offset})")
        self.offset = offset
        self.path = path


class NumericFailure(RuntimeError):
    """An iterative numeric routine failed to converge."""
