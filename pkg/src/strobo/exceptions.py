"""Exception hierarchy shared by every stage of the pipeline."""


class StroboError(Exception):
    """Base class for all errors raised by this package."""


class InvalidArgument(StroboError, ValueError):
    pass


class DimensionMismatch(StroboError, ValueError):
    pass


class MalformedHeader(StroboError):
    pass


class UnsupportedChroma(StroboError):
    pass


class TruncatedFrame(StroboError):
    pass


class MissingFrameMarker(StroboError):
    pass


class NoFramesFound(StroboError):
    pass


class UnsupportedPixelFormat(StroboError):
    pass


class IoFailure(StroboError, OSError):
    pass


class ModelEmpty(StroboError):
    """Raised when the background is requested before any frame was seen."""


class EmptyHistogram(StroboError, ValueError):
    pass


class EmptyMask(StroboError, ValueError):
    pass


class MissingFrame(StroboError, KeyError):
    pass


class IndexOutOfRange(StroboError, IndexError):
    pass


# errors that mean "the input could not be read" (CLI exit status 2)
INPUT_ERRORS = (
    MalformedHeader,
    UnsupportedChroma,
    TruncatedFrame,
    MissingFrameMarker,
    NoFramesFound,
    UnsupportedPixelFormat,
    IoFailure,
    DimensionMismatch,
)
