"""Exception types shared across the package.

Everything here describes a data-level problem: bad input files, rasters
that violate an operation's domain, and so on. The command-line front-end
maps these to exit code 2.
"""


class BshapeError(Exception):
    """Base class for all data-level errors raised by this package."""


class ParseError(BshapeError):
    """Malformed structured-text input. Carries the byte offset when known."""

    def __init__(self, message, offset=None):
        super().__init__(message)
        self.offset = offset


class ReferentialIntegrityError(BshapeError):
    """An annotation references a missing image or category."""

    def __init__(self, message, annotation_id=None):
        super().__init__(message)
        self.annotation_id = annotation_id


class RleFormatError(BshapeError):
    """A run-length encoding does not describe a mask of the declared size."""


class EmptyBoxError(BshapeError):
    """A bounding box covers no pixels after rounding and clamping."""


class EmptyMaskError(BshapeError):
    """An operation that needs foreground pixels received an empty mask."""


class UndefinedIouError(BshapeError):
    """Overlap of two empty regions has no defined IoU."""


class DimensionMismatchError(BshapeError):
    """Paired rasters have different shapes."""


class DomainError(BshapeError):
    """An input value lies outside the operation's domain."""


class MaskFileError(BshapeError):
    """A mask file is corrupt or uses an unsupported layout."""
