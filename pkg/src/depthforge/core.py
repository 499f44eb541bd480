"""Shared domain types and pinhole projection.

Conventions used everywhere in this package:

* Depth maps are row-major ``(height, width)`` float64 arrays of metric depth
  (meters) with a boolean validity mask; invalid entries are never read.
* Pixel coordinates are ``(u, v)`` = (column, row), with pixel centers at
  integer coordinates.
* 3D points live in the camera frame: x right, y down, z along the optical
  axis (meters). A single point is a length-3 array; point sets are ``(n, 3)``.
* All value types are frozen after construction; their arrays are marked
  read-only so instances can be shared freely across threads.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BehindCameraError, InputError, InvalidPixelError

__all__ = [
    "CameraIntrinsics",
    "DepthMap",
    "LabelMap",
    "PointCloud",
    "SparseSamples",
    "project",
    "unproject",
]


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole parameters: focal lengths and principal point, in pixels."""

    fx: float
    fy: float
    cx: float
    cy: float

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise InputError(f"focal lengths must be positive, got fx={self.fx}, fy={self.fy}")
        for name in ("fx", "fy", "cx", "cy"):
            if not np.isfinite(getattr(self, name)):
                raise InputError(f"intrinsics parameter {name} is not finite")

    def scaled(self, factor: float) -> "CameraIntrinsics":
        """Intrinsics after uniformly resizing the image by ``factor``."""
        return CameraIntrinsics(self.fx * factor, self.fy * factor, self.cx * factor, self.cy * factor)

    def cropped(self, left: float, top: float) -> "CameraIntrinsics":
        """Intrinsics after removing ``left`` columns and ``top`` rows."""
        return CameraIntrinsics(self.fx, self.fy, self.cx - left, self.cy - top)

    def to_dict(self) -> dict:
        return {"fx": self.fx, "fy": self.fy, "cx": self.cx, "cy": self.cy}

    @classmethod
    def from_dict(cls, d: dict) -> "CameraIntrinsics":
        try:
            return cls(float(d["fx"]), float(d["fy"]), float(d["cx"]), float(d["cy"]))
        except KeyError as e:
            raise InputError(f"intrinsics document missing key {e}") from e


@dataclass(frozen=True)
class DepthMap:
    """Dense metric depth grid with an explicit per-pixel validity mask.

    Every valid pixel holds a finite depth > 0. Invalid pixels may hold any
    value (conventionally 0) and are never interpreted as depths.
    """

    values: np.ndarray
    validity: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        validity = np.asarray(self.validity, dtype=bool)
        if values.ndim != 2:
            raise InputError(f"depth values must be 2-D, got shape {values.shape}")
        if validity.shape != values.shape:
            raise InputError(
                f"validity shape {validity.shape} does not match values shape {values.shape}"
            )
        sampled = values[validity]
        if sampled.size and (not np.all(np.isfinite(sampled)) or np.any(sampled <= 0)):
            raise InputError("valid pixels must carry finite depth > 0")
        object.__setattr__(self, "values", _freeze(values))
        object.__setattr__(self, "validity", _freeze(validity))

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def valid_count(self) -> int:
        return int(self.validity.sum())

    @classmethod
    def from_values(cls, values, invalid_value: float = 0.0) -> "DepthMap":
        """Build from a raw grid where ``invalid_value`` marks missing depth."""
        values = np.asarray(values, dtype=np.float64)
        validity = np.isfinite(values) & (values != invalid_value) & (values > 0)
        filled = np.where(validity, values, 0.0)
        return cls(filled, validity)

    def with_values(self, values: np.ndarray, validity: np.ndarray | None = None) -> "DepthMap":
        """Copy of this map with new depths (and optionally a new mask)."""
        return DepthMap(values, self.validity if validity is None else validity)


@dataclass(frozen=True)
class LabelMap:
    """Per-pixel non-negative integer object ids; 0 means unlabeled."""

    labels: np.ndarray

    def __post_init__(self):
        labels = np.asarray(self.labels)
        if labels.ndim != 2:
            raise InputError(f"label map must be 2-D, got shape {labels.shape}")
        if not np.issubdtype(labels.dtype, np.integer):
            if not np.all(labels == np.floor(labels)):
                raise InputError("label ids must be integers")
            labels = labels.astype(np.int64)
        if labels.size and labels.min() < 0:
            raise InputError("label ids must be non-negative")
        object.__setattr__(self, "labels", _freeze(labels.astype(np.int32)))

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.labels.shape

    def ids(self) -> np.ndarray:
        """Distinct object ids present, excluding the unlabeled id 0."""
        out = np.unique(self.labels)
        return out[out != 0]


@dataclass(frozen=True)
class SparseSamples:
    """Sparse trusted depth measurements: columns u, rows v, depths in meters."""

    u: np.ndarray
    v: np.ndarray
    depth: np.ndarray

    def __post_init__(self):
        u = np.asarray(self.u, dtype=np.int64).ravel()
        v = np.asarray(self.v, dtype=np.int64).ravel()
        depth = np.asarray(self.depth, dtype=np.float64).ravel()
        if not (u.shape == v.shape == depth.shape):
            raise InputError("u, v, depth must have equal lengths")
        if depth.size and (np.any(depth <= 0) or not np.all(np.isfinite(depth))):
            raise InputError("sample depths must be finite and > 0")
        if u.size:
            flat = set(zip(u.tolist(), v.tolist()))
            if len(flat) != u.size:
                raise InputError("duplicate (u, v) sample positions")
        object.__setattr__(self, "u", _freeze(u))
        object.__setattr__(self, "v", _freeze(v))
        object.__setattr__(self, "depth", _freeze(depth))

    def __len__(self) -> int:
        return self.u.size

    def check_bounds(self, width: int, height: int) -> None:
        """Raise if any sample lies outside a width x height image."""
        bad = (self.u < 0) | (self.u >= width) | (self.v < 0) | (self.v >= height)
        if np.any(bad):
            i = int(np.argmax(bad))
            raise InputError(
                f"sample ({self.u[i]}, {self.v[i]}) outside {width}x{height} image"
            )

    def subset(self, mask: np.ndarray) -> "SparseSamples":
        return SparseSamples(self.u[mask], self.v[mask], self.depth[mask])

    @classmethod
    def empty(cls) -> "SparseSamples":
        return cls(np.empty(0, np.int64), np.empty(0, np.int64), np.empty(0, np.float64))


@dataclass(frozen=True)
class PointCloud:
    """Camera-frame 3D points, each tagged with its originating pixel.

    ``points[i, 2]`` always equals the depth read at ``pixels[i]``.
    """

    points: np.ndarray        # (n, 3) float64
    pixels: np.ndarray        # (n, 2) int64, columns (u, v)

    def __post_init__(self):
        points = np.asarray(self.points, dtype=np.float64).reshape(-1, 3)
        pixels = np.asarray(self.pixels, dtype=np.int64).reshape(-1, 2)
        if points.shape[0] != pixels.shape[0]:
            raise InputError("points and pixels must have equal lengths")
        object.__setattr__(self, "points", _freeze(points))
        object.__setattr__(self, "pixels", _freeze(pixels))

    def __len__(self) -> int:
        return self.points.shape[0]


def unproject(depth_map: DepthMap, intrinsics: CameraIntrinsics, pixels) -> PointCloud:
    """Lift depth-map pixels to camera-frame 3D points.

    ``pixels`` is an ``(n, 2)`` array-like of integer (u, v) positions; each
    must be inside the map and valid. The returned cloud preserves order and
    records the source pixel of every point.
    """
    px = np.asarray(pixels, dtype=np.int64).reshape(-1, 2)
    if px.shape[0] == 0:
        return PointCloud(np.empty((0, 3)), np.empty((0, 2), np.int64))
    u, v = px[:, 0], px[:, 1]
    h, w = depth_map.shape
    oob = (u < 0) | (u >= w) | (v < 0) | (v >= h)
    if np.any(oob):
        i = int(np.argmax(oob))
        raise InvalidPixelError(f"pixel ({u[i]}, {v[i]}) outside {w}x{h} depth map")
    invalid = ~depth_map.validity[v, u]
    if np.any(invalid):
        i = int(np.argmax(invalid))
        raise InvalidPixelError(f"pixel ({u[i]}, {v[i]}) has no valid depth")
    d = depth_map.values[v, u]
    pts = np.empty((px.shape[0], 3))
    pts[:, 0] = (u - intrinsics.cx) * d / intrinsics.fx
    pts[:, 1] = (v - intrinsics.cy) * d / intrinsics.fy
    pts[:, 2] = d
    return PointCloud(pts, px)


def unproject_grid(u, v, depth, intrinsics: CameraIntrinsics) -> np.ndarray:
    """Vectorized pinhole lift for already-gathered (u, v, depth) arrays."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    d = np.asarray(depth, dtype=np.float64)
    return np.stack(
        [(u - intrinsics.cx) * d / intrinsics.fx, (v - intrinsics.cy) * d / intrinsics.fy, d],
        axis=-1,
    )


def project(point, intrinsics: CameraIntrinsics):
    """Project camera-frame point(s) to continuous pixel coordinates.

    Accepts a single length-3 point or an ``(n, 3)`` array. Returns
    ``(u, v, depth)`` scalars or arrays. Raises for z <= 0: points behind the
    camera (or on its plane) have no image.
    """
    p = np.asarray(point, dtype=np.float64)
    single = p.ndim == 1
    p = p.reshape(-1, 3)
    z = p[:, 2]
    if np.any(z <= 0):
        i = int(np.argmax(z <= 0))
        raise BehindCameraError(f"point {p[i].tolist()} has z <= 0")
    u = intrinsics.fx * p[:, 0] / z + intrinsics.cx
    v = intrinsics.fy * p[:, 1] / z + intrinsics.cy
    if single:
        return float(u[0]), float(v[0]), float(z[0])
    return u, v, z.copy()
