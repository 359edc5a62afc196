class TwinSyncError(Exception):
    pass


class ConfigError(TwinSyncError, ValueError):
    """Invalid or inconsistent configuration."""


class LoadError(TwinSyncError, ValueError):
    """A trajectory file could not be parsed."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DomainError(TwinSyncError, ValueError):
    """An argument lies outside the operation's domain."""


class EpisodeEnd(TwinSyncError):
    """The trajectory has no ticks left for another epoch."""


class CheckpointMismatch(TwinSyncError):
    """Checkpoint was produced under a different configuration."""
