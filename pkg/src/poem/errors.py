"""Exception hierarchy shared across the package."""


class PoemError(Exception):
    """Base class for every error this library raises on purpose."""


class InvalidInputError(PoemError, ValueError):
    """An argument violates a documented precondition."""


class SelectionError(PoemError):
    """Example retrieval cannot satisfy the request (message names the deficient label)."""


class RenderError(PoemError):
    """A template placeholder cannot be resolved."""


class BackendError(PoemError):
    """A remote backend is unreachable or answered with a failure status."""

    def __init__(self, message: str, *, attempts: int | None = None, status: int | None = None):
        super().__init__(message)
        self.attempts = attempts
        self.status = status


class ProtocolError(PoemError):
    """A backend answered, but the payload violates the wire contract."""


class SnapshotError(PoemError):
    """A memory snapshot file cannot be loaded."""


class ConfigError(PoemError):
    """A task configuration or scenario file failed validation."""
