"""Exception types raised across the package."""


class SimilocError(Exception):
    """Base class for all package errors."""


class RasterFormatError(SimilocError):
    """A raster or feature-map file has a malformed header."""


class DimensionMismatchError(SimilocError):
    """Payload size or array shape disagrees with what was declared."""


class MissingSidecarError(SimilocError):
    def __init__(self, path):
        self.path = str(path)
        super().__init__(f"missing geo sidecar: {self.path}")


class DegenerateInputError(SimilocError):
    """Input carries no signal (e.g. an all-zero BEV), as opposed to a poor match."""


class InputParseError(SimilocError):
    """A text input (CSV, scan file, config) could not be parsed."""
