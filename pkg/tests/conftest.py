"""Shared fixtures and small builders used across the test suite."""

from __future__ import annotations

import numpy as np
import pytest

from depthforge import CameraIntrinsics, DepthMap, LabelMap, SparseSamples
from depthforge.meshing import TriangleMesh, triangulate_grid


@pytest.fixture
def intr() -> CameraIntrinsics:
    return CameraIntrinsics(fx=120.0, fy=110.0, cx=15.5, cy=11.5)


def make_depth(values, validity=None) -> DepthMap:
    values = np.asarray(values, dtype=np.float64)
    if validity is None:
        validity = np.ones_like(values, dtype=bool)
    return DepthMap(values, np.asarray(validity, dtype=bool))


def full_labels(shape, label=1) -> LabelMap:
    return LabelMap(np.full(shape, label, dtype=np.int32))


def samples_from_arrays(u, v, d) -> SparseSamples:
    return SparseSamples(np.asarray(u), np.asarray(v), np.asarray(d))


def height_field_mesh(w: int, h: int, fn=None, scale: float = 1.0) -> TriangleMesh:
    """Grid mesh over a w x h pixel rectangle with vertex positions
    (u*scale, v*scale, fn(u, v)); fn defaults to a gentle curved surface so
    the mesh is not degenerate-planar."""
    uu, vv = np.meshgrid(np.arange(w), np.arange(h))
    px = np.column_stack([uu.ravel(), vv.ravel()]).astype(np.int64)
    if fn is None:
        fn = lambda u, v: 2.0 + 0.05 * np.sin(0.8 * u) + 0.04 * np.cos(0.7 * v)
    z = fn(px[:, 0].astype(float), px[:, 1].astype(float))
    vertices = np.column_stack([px[:, 0] * scale, px[:, 1] * scale, z])
    return TriangleMesh(vertices=vertices, pixels=px, triangles=triangulate_grid(px))


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    """Uniform random rotation via QR of a Gaussian matrix, det forced +1."""
    a = rng.standard_normal((3, 3))
    q, r = np.linalg.qr(a)
    q *= np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q
