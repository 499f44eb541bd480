"""Sparse-sample generation and analytic synthetic scenes.

Synthetic scenes are built from planes and axis-aligned boxes because their
ray intersections have closed forms: every pixel's depth can be checked
against an independent oracle, which makes them suitable ground truth for
end-to-end pipeline tests where no trained predictor is available.

Randomness comes from a self-contained xorshift64* generator (seeded through
splitmix64) so sample selection is reproducible bit-for-bit across platforms
and Python versions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import CameraIntrinsics, DepthMap, LabelMap, SparseSamples
from .errors import InputError, InsufficientPixelsError, InvalidSceneError

__all__ = [
    "Box",
    "PerturbSpec",
    "Plane",
    "SynthScene",
    "Xorshift64Star",
    "perturb",
    "sample_uniform",
    "synth_scene",
]

_MASK64 = (1 << 64) - 1


class Xorshift64Star:
    """xorshift64* PRNG (shifts 12/25/27, multiplier 0x2545F4914F6CDD1D).

    The user seed is passed through one round of splitmix64 so that seed 0 is
    usable and nearby seeds decorrelate.
    """

    def __init__(self, seed: int):
        z = (int(seed) + 0x9E3779B97F4A7C15) & _MASK64
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        z ^= z >> 31
        self._state = z if z != 0 else 0x9E3779B97F4A7C15

    def next_uint64(self) -> int:
        x = self._state
        x ^= x >> 12
        x = (x ^ (x << 25)) & _MASK64
        x ^= x >> 27
        self._state = x
        return (x * 0x2545F4914F6CDD1D) & _MASK64

    def next_below(self, n: int) -> int:
        """Integer in [0, n). Modulo bias is < n / 2**64, negligible for image
        index ranges."""
        if n <= 0:
            raise InputError(f"need n > 0, got {n}")
        return self.next_uint64() % n

    def next_float(self) -> float:
        """Float in [0, 1) with 53 random bits."""
        return (self.next_uint64() >> 11) * (1.0 / (1 << 53))


def sample_uniform(truth: DepthMap, m: int, seed: int) -> SparseSamples:
    """Pick ``m`` distinct valid pixels uniformly at random (partial
    Fisher-Yates over the row-major valid-pixel list) and read their depths.
    """
    if m < 0:
        raise InputError(f"sample count must be >= 0, got {m}")
    vs, us = np.nonzero(truth.validity)
    n = vs.size
    if m > n:
        raise InsufficientPixelsError(f"requested {m} samples but only {n} valid pixels")
    if m == 0:
        return SparseSamples.empty()
    rng = Xorshift64Star(seed)
    idx = np.arange(n)
    for i in range(m):
        j = i + rng.next_below(n - i)
        idx[i], idx[j] = idx[j], idx[i]
    chosen = idx[:m]
    u, v = us[chosen], vs[chosen]
    return SparseSamples(u, v, truth.values[v, u])


@dataclass(frozen=True)
class PerturbSpec:
    """Error structure applied to a depth map to fake a 'prediction'.

    The smooth component is a sum of ``waves`` random-direction plane waves
    with the given spatial wavelength, rescaled so its peak magnitude equals
    ``amplitude``. ``object_bias`` adds a constant per label id (requires a
    label map at call time).
    """

    amplitude: float = 0.0
    wavelength: float = 32.0
    waves: int = 4
    object_bias: dict[int, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.amplitude < 0:
            raise InputError(f"amplitude must be >= 0, got {self.amplitude}")
        if self.wavelength <= 0:
            raise InputError(f"wavelength must be > 0, got {self.wavelength}")
        if self.waves < 1:
            raise InputError(f"need at least one wave component, got {self.waves}")


def perturb(
    depth: DepthMap,
    spec: PerturbSpec,
    seed: int,
    labels: LabelMap | None = None,
) -> DepthMap:
    """Add the spec's smooth error field (and per-object biases) to all valid
    pixels. The validity mask is untouched; a no-op spec returns the input
    unchanged."""
    if spec.amplitude == 0 and not spec.object_bias:
        return depth
    if spec.object_bias and labels is None:
        raise InputError("object_bias requires a label map")
    if labels is not None and labels.shape != depth.shape:
        raise InputError(f"label map shape {labels.shape} does not match depth {depth.shape}")

    h, w = depth.shape
    error = np.zeros((h, w))
    if spec.amplitude > 0:
        rng = Xorshift64Star(seed)
        uu, vv = np.meshgrid(np.arange(w, dtype=np.float64), np.arange(h, dtype=np.float64))
        for _ in range(spec.waves):
            theta = rng.next_float() * 2.0 * np.pi
            phase = rng.next_float() * 2.0 * np.pi
            freq = 2.0 * np.pi / spec.wavelength
            error += np.sin(freq * (uu * np.cos(theta) + vv * np.sin(theta)) + phase)
        peak = np.abs(error).max()
        if peak > 0:
            error *= spec.amplitude / peak
    if spec.object_bias:
        for obj_id, bias in sorted(spec.object_bias.items()):
            error[labels.labels == obj_id] += bias

    values = depth.values.copy()
    values[depth.validity] += error[depth.validity]
    return DepthMap(values, depth.validity)


@dataclass(frozen=True)
class Plane:
    """Infinite plane ``normal . X = offset`` in the camera frame."""

    normal: tuple[float, float, float]
    offset: float

    def __post_init__(self):
        n = np.asarray(self.normal, dtype=np.float64)
        if not np.any(n != 0):
            raise InputError("plane normal must be nonzero")


@dataclass(frozen=True)
class Box:
    """Axis-aligned box given by opposite corners, camera frame."""

    min_corner: tuple[float, float, float]
    max_corner: tuple[float, float, float]

    def __post_init__(self):
        lo = np.asarray(self.min_corner, dtype=np.float64)
        hi = np.asarray(self.max_corner, dtype=np.float64)
        if not np.all(lo < hi):
            raise InputError(f"box corners must satisfy min < max, got {lo} vs {hi}")


@dataclass(frozen=True)
class SynthScene:
    """Analytic scene: ground-truth depth, per-object labels, intrinsics."""

    truth: DepthMap
    labels: LabelMap
    intrinsics: CameraIntrinsics
    descriptors: tuple


def _ray_directions(width: int, height: int, intr: CameraIntrinsics):
    """Per-pixel ray direction components (dx, dy, 1); depth along the ray at
    parameter t is exactly t."""
    uu, vv = np.meshgrid(np.arange(width, dtype=np.float64), np.arange(height, dtype=np.float64))
    return (uu - intr.cx) / intr.fx, (vv - intr.cy) / intr.fy


def _plane_depth(plane: Plane, dx, dy) -> np.ndarray:
    n = np.asarray(plane.normal, dtype=np.float64)
    denom = n[0] * dx + n[1] * dy + n[2]
    with np.errstate(divide="ignore", invalid="ignore"):
        t = plane.offset / denom
    t = np.where(np.isfinite(t) & (t > 0), t, np.inf)
    return t


def _box_depth(box: Box, dx, dy) -> np.ndarray:
    lo = np.asarray(box.min_corner, dtype=np.float64)
    hi = np.asarray(box.max_corner, dtype=np.float64)
    t_near = np.full(dx.shape, -np.inf)
    t_far = np.full(dx.shape, np.inf)
    for axis, d in enumerate((dx, dy, np.ones_like(dx))):
        with np.errstate(divide="ignore", invalid="ignore"):
            t0 = np.where(d != 0, lo[axis] / d, np.where((lo[axis] <= 0), -np.inf, np.inf))
            t1 = np.where(d != 0, hi[axis] / d, np.where((hi[axis] >= 0), np.inf, -np.inf))
        # rays with zero direction component hit the slab iff the origin lies inside it
        zero = d == 0
        inside = (lo[axis] <= 0) & (0 <= hi[axis])
        t0 = np.where(zero, np.where(inside, -np.inf, np.inf), t0)
        t1 = np.where(zero, np.where(inside, np.inf, -np.inf), t1)
        near = np.minimum(t0, t1)
        far = np.maximum(t0, t1)
        t_near = np.maximum(t_near, near)
        t_far = np.minimum(t_far, far)
    hit = (t_near <= t_far) & (t_near > 0)
    return np.where(hit, t_near, np.inf)


def synth_scene(
    descriptors,
    intrinsics: CameraIntrinsics,
    size: tuple[int, int],
    background_depth: float | None = None,
) -> SynthScene:
    """Render an analytic scene of planes/boxes at the given (width, height).

    Each pixel takes the depth of the nearest intersected descriptor and the
    label ``index + 1``. Pixels hitting nothing become invalid, or valid
    background at ``background_depth`` with label 0 when one is given.
    A descriptor no forward ray can reach is rejected as behind the camera.
    """
    width, height = size
    if width <= 0 or height <= 0:
        raise InputError(f"size must be positive, got {size}")
    descriptors = tuple(descriptors)
    if not descriptors:
        raise InputError("scene needs at least one descriptor")
    dx, dy = _ray_directions(width, height, intrinsics)

    depth_stack = np.full((len(descriptors), height, width), np.inf)
    for i, desc in enumerate(descriptors):
        if isinstance(desc, Plane):
            depth_stack[i] = _plane_depth(desc, dx, dy)
        elif isinstance(desc, Box):
            depth_stack[i] = _box_depth(desc, dx, dy)
        else:
            raise InputError(f"unknown descriptor type {type(desc).__name__}")
        if not np.any(np.isfinite(depth_stack[i])):
            raise InvalidSceneError(f"descriptor {i} ({type(desc).__name__}) is behind the camera")

    nearest = np.argmin(depth_stack, axis=0)
    depth = np.take_along_axis(depth_stack, nearest[None], axis=0)[0]
    hit = np.isfinite(depth)
    labels = np.where(hit, nearest + 1, 0).astype(np.int32)

    if background_depth is not None:
        if background_depth <= 0:
            raise InputError(f"background depth must be > 0, got {background_depth}")
        values = np.where(hit, depth, background_depth)
        validity = np.ones_like(hit)
    else:
        values = np.where(hit, depth, 0.0)
        validity = hit
    return SynthScene(
        truth=DepthMap(values, validity),
        labels=LabelMap(labels),
        intrinsics=intrinsics,
        descriptors=descriptors,
    )
