"""Exception hierarchy.

Two top-level families matter for the CLI exit code: ``InputError`` (bad
files, shapes, or parameters; exit code 1) and ``NumericalError`` (a solve or
geometric operation failed on otherwise well-formed input; exit code 2).
"""


class DepthForgeError(Exception):
    """Base class for all errors raised by this package."""


class InputError(DepthForgeError):
    """Invalid input data or configuration (CLI exit code 1)."""


class NumericalError(DepthForgeError):
    """Numerical or geometric failure during processing (CLI exit code 2)."""


class InvalidPixelError(InputError):
    """A requested pixel is outside the map or masked invalid."""


class BehindCameraError(NumericalError):
    """A 3D point with z <= 0 cannot be projected."""


class InputTooSmallError(InputError):
    """Image smaller than the filter kernel it must support."""


class NoOverlapError(InputError):
    """Two maps share no mutually valid pixels to compare."""


class InsufficientPixelsError(InputError):
    """Fewer valid pixels available than requested."""


class InvalidSceneError(InputError):
    """A synthetic-scene descriptor cannot be seen by the camera."""


class TooFewVerticesError(InputError):
    """Triangulation needs at least three vertices."""


class DegenerateInputError(NumericalError):
    """Geometrically degenerate input (e.g. all points collinear)."""


class DegenerateTriangleError(NumericalError):
    """A zero-area triangle has no well-defined cotangent weights."""


class SingularSystemError(NumericalError):
    """The deformation system has no unique solution."""


class ConfigError(InputError):
    """Pipeline configuration is incomplete or inconsistent."""


class ConversionError(InputError):
    """A dataset archive could not be converted."""
