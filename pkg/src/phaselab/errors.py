"""Exception types shared across modules."""


class FormatError(ValueError):
    """A file does not match the expected on-disk format."""

    category = "format"


class BadMagicError(FormatError):
    category = "format.magic"


class MalformedHeaderError(FormatError):
    category = "format.header"


class UnsupportedMaxvalError(FormatError):
    category = "format.maxval"


class TruncatedPayloadError(FormatError):
    category = "format.truncated"


class TrainingDivergedError(RuntimeError):
    """Training loss became non-finite."""

    category = "train.diverged"
