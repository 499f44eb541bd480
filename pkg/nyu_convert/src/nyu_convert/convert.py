"""Convert the NYU-Depth-v2 labeled archive to neutral per-frame files.

The labeled archive is a MATLAB v7.3 container (HDF5) holding registered
RGB images, metric depth, and per-pixel class/instance annotations, all
640x480. Each frame is resized to half (320x240) and center-cropped to
304x228, then written as:

* ``rgb/NNNN.png``    8-bit color
* ``depth/NNNN.png``  16-bit single channel, millimeters, 0 = missing
* ``labels/NNNN.png`` 16-bit single channel object ids, 0 = unlabeled

plus one ``intrinsics.json`` describing the pinhole parameters of the
converted frames (source intrinsics scaled by 0.5, shifted by the crop
offset).

Resampling convention: with pixel centers at integer coordinates, the
half-size grid samples the source at exactly (2u, 2v), so bilinear
interpolation collapses to reading even source pixels. This keeps depth
values unblended across object boundaries and makes the intrinsics
transform exact. Labels use the same grid (nearest, ids preserved).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

try:
    import h5py
except ImportError:  # pragma: no cover - hard dependency, guarded for clarity
    h5py = None

from PIL import Image


class ConversionError(Exception):
    """The archive is unreadable or a frame cannot be converted."""


# Pinhole parameters of the dataset's color camera (the labeled archive's
# depth is registered to RGB). Override with --intrinsics for other sources.
DEFAULT_SOURCE_INTRINSICS = {
    "fx": 518.8579011745,
    "fy": 519.4696111213,
    "cx": 325.5824494112,
    "cy": 253.7361663340,
}

SOURCE_SIZE = (640, 480)
RESIZED_SIZE = (320, 240)
TARGET_SIZE = (304, 228)
DEPTH_SCALE = 1.0 / 1000.0  # stored value 1 = 1 mm
MAX_DEPTH_M = 65.535


@dataclass(frozen=True)
class ConversionSpec:
    """What to convert, where to put it, and the output geometry."""

    archive: str
    output_dir: str
    frames: slice = slice(None)
    label_mode: str = "class"  # "class" | "instance"
    intrinsics: dict | None = None
    target_size: tuple[int, int] = TARGET_SIZE
    depth_scale: float = DEPTH_SCALE

    def __post_init__(self):
        if self.label_mode not in ("class", "instance"):
            raise ConversionError(f"unknown label mode '{self.label_mode}'")
        tw, th = self.target_size
        if tw > RESIZED_SIZE[0] or th > RESIZED_SIZE[1] or tw < 1 or th < 1:
            raise ConversionError(
                f"crop {tw}x{th} does not fit inside the resized frame "
                f"{RESIZED_SIZE[0]}x{RESIZED_SIZE[1]}"
            )
        if self.depth_scale <= 0:
            raise ConversionError(f"depth scale must be > 0, got {self.depth_scale}")


def crop_offsets(target_size: tuple[int, int] = TARGET_SIZE) -> tuple[int, int]:
    left = (RESIZED_SIZE[0] - target_size[0]) // 2
    top = (RESIZED_SIZE[1] - target_size[1]) // 2
    return left, top


def convert_intrinsics(source: dict, target_size: tuple[int, int] = TARGET_SIZE) -> dict:
    left, top = crop_offsets(target_size)
    return {
        "fx": source["fx"] * 0.5,
        "fy": source["fy"] * 0.5,
        "cx": source["cx"] * 0.5 - left,
        "cy": source["cy"] * 0.5 - top,
    }


def _half_then_crop(frame: np.ndarray, target_size: tuple[int, int]) -> np.ndarray:
    """Sample even source pixels (half-size grid), then center-crop.

    Works for 2-D grids and (H, W, C) color frames alike.
    """
    h, w = frame.shape[:2]
    if (w, h) != SOURCE_SIZE:
        raise ConversionError(f"expected {SOURCE_SIZE[0]}x{SOURCE_SIZE[1]} frame, got {w}x{h}")
    half = frame[::2, ::2]
    left, top = crop_offsets(target_size)
    return half[top : top + target_size[1], left : left + target_size[0]]


def _combine_instance_ids(classes: np.ndarray, instances: np.ndarray) -> np.ndarray:
    """One id per (class, instance) pair present; unlabeled stays 0."""
    combined = classes.astype(np.int64) * 1024 + instances.astype(np.int64)
    combined[classes == 0] = 0
    ids = np.unique(combined)
    ids = ids[ids != 0]
    out = np.zeros_like(combined)
    for new_id, key in enumerate(ids, start=1):
        out[combined == key] = new_id
    return out.astype(np.int32)


def _write_depth_png(path: Path, depth_m: np.ndarray, scale: float) -> None:
    quantized = np.round(depth_m / scale)
    valid = np.isfinite(depth_m) & (depth_m > 0) & (quantized >= 1) & (quantized <= 65535)
    out = np.where(valid, quantized, 0).astype(np.uint16)
    Image.fromarray(out).save(path, format="PNG")


def _write_label_png(path: Path, labels: np.ndarray) -> None:
    if labels.max(initial=0) > 65535:
        raise ConversionError("more than 65535 distinct object ids in one frame")
    Image.fromarray(labels.astype(np.uint16)).save(path, format="PNG")


def _open_archive(path: str):
    if h5py is None:
        raise ConversionError("h5py is required to read the archive")
    try:
        f = h5py.File(path, "r")
    except (OSError, IOError) as e:
        raise ConversionError(f"cannot open archive '{path}': {e}") from e
    for key in ("images", "depths", "labels"):
        if key not in f:
            f.close()
            raise ConversionError(f"archive '{path}' is missing dataset '{key}'")
    return f


def convert(spec: ConversionSpec) -> dict:
    """Run the conversion; returns a summary with the frames written."""
    out = Path(spec.output_dir)
    for sub in ("rgb", "depth", "labels"):
        (out / sub).mkdir(parents=True, exist_ok=True)

    source_intr = dict(DEFAULT_SOURCE_INTRINSICS if spec.intrinsics is None else spec.intrinsics)
    converted_intr = convert_intrinsics(source_intr, spec.target_size)
    with open(out / "intrinsics.json", "w") as fh:
        json.dump(converted_intr, fh, indent=2, sort_keys=True)
        fh.write("\n")

    written = []
    with _open_archive(spec.archive) as archive:
        n_frames = archive["images"].shape[0]
        has_instances = "instances" in archive
        if spec.label_mode == "instance" and not has_instances:
            raise ConversionError("archive has no 'instances' dataset for instance mode")
        indices = range(*spec.frames.indices(n_frames))
        for i in indices:
            try:
                # MATLAB stores column-major: transpose to (H, W[, C])
                rgb = np.asarray(archive["images"][i]).T
                depth = np.asarray(archive["depths"][i]).T
                classes = np.asarray(archive["labels"][i]).T
                instances = np.asarray(archive["instances"][i]).T if has_instances else None
            except Exception as e:
                raise ConversionError(f"frame {i}: cannot read archive data ({e})") from e

            try:
                rgb_out = _half_then_crop(rgb, spec.target_size)
                depth_out = _half_then_crop(depth.astype(np.float64), spec.target_size)
                class_out = _half_then_crop(classes, spec.target_size)
                if spec.label_mode == "instance":
                    inst_out = _half_then_crop(instances, spec.target_size)
                    labels_out = _combine_instance_ids(class_out, inst_out)
                else:
                    labels_out = class_out.astype(np.int32)
            except ConversionError as e:
                raise ConversionError(f"frame {i}: {e}") from e

            stem = f"{i:04d}"
            Image.fromarray(rgb_out.astype(np.uint8)).save(out / "rgb" / f"{stem}.png")
            _write_depth_png(out / "depth" / f"{stem}.png", depth_out, spec.depth_scale)
            _write_label_png(out / "labels" / f"{stem}.png", labels_out)
            written.append(stem)

    return {
        "frames": written,
        "intrinsics": converted_intr,
        "size": list(spec.target_size),
        "output_dir": str(out),
    }
