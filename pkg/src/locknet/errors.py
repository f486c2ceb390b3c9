"""Exception types shared across the package."""


class LocknetError(Exception):
    """Base class for all errors raised by this package."""


class FormatError(LocknetError):
    """A binary or text file failed to parse.

    ``offset`` is the byte (or line) position at which parsing failed,
    when known.
    """

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at offset {offset})"
        super().__init__(message)
        self.offset = offset


class ShapeError(LocknetError):
    """Tensor shapes are incompatible with the network or dataset."""


class ConfigError(LocknetError):
    """An experiment configuration is invalid.

    ``problems`` lists every violation found, so a bad config is reported
    exhaustively rather than one field at a time.
    """

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class TrainingDiverged(LocknetError):
    """Training hit a non-finite loss or gradient."""
