"""Input validation and coercion helpers for the estimator API.

These accept either the package's domain types or plain array-likes and
return the domain type, raising ``InputError`` with a readable message
otherwise. Array inputs use the on-disk conventions: 0 (or NaN) marks an
invalid depth pixel, 0 an unlabeled pixel.
"""

from __future__ import annotations

import numpy as np

from .core import CameraIntrinsics, DepthMap, LabelMap, SparseSamples
from .errors import InputError

__all__ = [
    "as_depth_map",
    "as_intrinsics",
    "as_label_map",
    "as_samples",
    "check_same_shape",
]


def as_depth_map(x, name: str = "depth") -> DepthMap:
    if isinstance(x, DepthMap):
        return x
    try:
        arr = np.asarray(x, dtype=np.float64)
    except (TypeError, ValueError) as e:
        raise InputError(f"{name}: cannot interpret as a depth array ({e})") from e
    if arr.ndim != 2:
        raise InputError(f"{name}: expected a 2-D array, got shape {arr.shape}")
    return DepthMap.from_values(arr)


def as_label_map(x, name: str = "labels") -> LabelMap:
    if isinstance(x, LabelMap):
        return x
    try:
        return LabelMap(np.asarray(x))
    except InputError as e:
        raise InputError(f"{name}: {e}") from e


def as_samples(x, name: str = "samples") -> SparseSamples:
    if isinstance(x, SparseSamples):
        return x
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise InputError(f"{name}: expected rows of (u, v, depth), got shape {arr.shape}")
    u, v = arr[:, 0], arr[:, 1]
    if not (np.all(u == np.round(u)) and np.all(v == np.round(v))):
        raise InputError(f"{name}: pixel coordinates must be integers")
    return SparseSamples(u.astype(np.int64), v.astype(np.int64), arr[:, 2])


def as_intrinsics(x, name: str = "intrinsics") -> CameraIntrinsics:
    if isinstance(x, CameraIntrinsics):
        return x
    if isinstance(x, dict):
        return CameraIntrinsics.from_dict(x)
    try:
        fx, fy, cx, cy = (float(v) for v in x)
    except (TypeError, ValueError) as e:
        raise InputError(f"{name}: expected CameraIntrinsics, dict, or (fx, fy, cx, cy)") from e
    return CameraIntrinsics(fx, fy, cx, cy)


def check_same_shape(a, b, what: str) -> None:
    if a.shape != b.shape:
        raise InputError(f"{what}: shape {b.shape} does not match {a.shape}")
