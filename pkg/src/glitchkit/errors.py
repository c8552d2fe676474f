"""Exception hierarchy shared by every module.

Each exception carries the process exit code the CLI reports for it, so
library callers and shell scripts see the same classification.
"""


class GlitchKitError(Exception):
    exit_code = 1


class UsageError(GlitchKitError, ValueError):
    """Bad arguments, malformed specs or configs."""

    exit_code = 2


class ImageIOError(GlitchKitError, OSError):
    """An image, mask or manifest could not be read or written."""

    exit_code = 3

    def __init__(self, path, reason):
        self.path = str(path)
        self.reason = reason
        super().__init__(f"{self.path}: {reason}")


class DataError(GlitchKitError, ValueError):
    """The data is well-formed but unusable (e.g. a single-class training set)."""

    exit_code = 4


class ModelError(GlitchKitError, ValueError):
    exit_code = 5


class CheckpointError(ModelError):
    code = "checkpoint_error"


class NotACheckpointError(CheckpointError):
    code = "bad_magic"


class CheckpointVersionError(CheckpointError):
    code = "bad_version"


class TruncatedCheckpointError(CheckpointError):
    code = "truncated"


class ArchitectureMismatchError(CheckpointError):
    code = "architecture_mismatch"


class TapeError(GlitchKitError, RuntimeError):
    pass
