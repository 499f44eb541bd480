"""NYU-Depth-v2 labeled-archive converter."""

__version__ = "0.1.0"

from .convert import (
    DEFAULT_SOURCE_INTRINSICS,
    DEPTH_SCALE,
    RESIZED_SIZE,
    SOURCE_SIZE,
    TARGET_SIZE,
    ConversionError,
    ConversionSpec,
    convert,
    convert_intrinsics,
    crop_offsets,
)

__all__ = [
    "ConversionError",
    "ConversionSpec",
    "DEFAULT_SOURCE_INTRINSICS",
    "DEPTH_SCALE",
    "RESIZED_SIZE",
    "SOURCE_SIZE",
    "TARGET_SIZE",
    "__version__",
    "convert",
    "convert_intrinsics",
    "crop_offsets",
]
