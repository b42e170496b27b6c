"""Exception types shared across the package."""


class TextBridgeError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(TextBridgeError):
    """Invalid pipeline configuration. Carries the offending field name."""

    def __init__(self, field: str, message: str):
        super().__init__(f"config field '{field}': {message}")
        self.field = field


class DatasetError(TextBridgeError):
    """Malformed dataset content. Carries the 1-based line number when known."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class TreeParseError(TextBridgeError):
    """Bracketed-tree syntax error. Carries the 0-based character offset."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at offset {offset})")
        self.offset = offset


class EmbeddingError(TextBridgeError):
    """Invalid embedding input or backend output."""


class RemoteServiceError(TextBridgeError):
    """Remote backend failed after bounded retries. Carries the attempt count."""

    def __init__(self, message: str, attempts: int):
        super().__init__(f"{message} (after {attempts} attempts)")
        self.attempts = attempts


class RewriteError(TextBridgeError):
    """Rewriting could not produce a usable variant."""


class ArtifactError(TextBridgeError):
    """A run artifact is missing, unreadable, or of the wrong kind."""
