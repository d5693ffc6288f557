"""Vehicle localization by matching road-similarity BEV images against a satellite map."""

from .errors import (DegenerateInputError, DimensionMismatchError, InputParseError, MissingSidecarError,
                     RasterFormatError, SimilocError)
from .georaster import GeoRaster, GeoRef, WorldPose

__version__ = "0.1.0"

__all__ = [
    "DegenerateInputError",
    "DimensionMismatchError",
    "GeoRaster",
    "GeoRef",
    "InputParseError",
    "MissingSidecarError",
    "RasterFormatError",
    "SimilocError",
    "WorldPose",
]
