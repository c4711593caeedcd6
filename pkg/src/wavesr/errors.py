"""Exception types raised across the package.

Every error derives from :class:`WaveSRError` so callers (the CLI in
particular) can map whole families onto exit codes.
"""


class WaveSRError(Exception):
    pass


class ShapeError(WaveSRError, ValueError):
    """Base for anything wrong with array shapes or sizes."""


class OddDimension(ShapeError):
    pass


class ShapeMismatch(ShapeError):
    pass


class ChannelMismatch(ShapeError):
    pass


class NonOddKernel(ShapeError):
    pass


class NonIntegralOutput(ShapeError):
    pass


class AttentionTooLarge(ShapeError):
    pass


class DivisibilityError(ShapeError):
    pass


class InputTooSmall(ShapeError):
    pass


class ImageTooSmall(ShapeError):
    pass


class IndivisibleDims(ShapeError):
    pass


class ImageSmallerThanWindow(ShapeError):
    pass


class RangeTagMismatch(WaveSRError, ValueError):
    pass


class NotScalar(WaveSRError, ValueError):
    pass


class GraphDetached(WaveSRError, RuntimeError):
    pass


class MissingGrad(WaveSRError, RuntimeError):
    pass


class VariantTermMismatch(WaveSRError, ValueError):
    pass


class DataError(WaveSRError, OSError):
    """Base for unreadable inputs and missing files."""


class UnreadableImage(DataError):
    pass


class UnsupportedFormat(DataError):
    pass


class MissingCounterpart(DataError):
    pass


class CheckpointError(DataError):
    pass


class EmptyDataset(WaveSRError, ValueError):
    pass


class ArchitectureMismatch(WaveSRError, ValueError):
    pass


class MissingPerceptualEncoder(WaveSRError, ValueError):
    pass


class ConfigError(WaveSRError, ValueError):
    def __init__(self, message: str, key: str | None = None):
        super().__init__(message)
        self.key = key


class Diverged(WaveSRError, RuntimeError):
    def __init__(self, message: str, last_checkpoint: str | None = None):
        super().__init__(message)
        self.last_checkpoint = last_checkpoint
