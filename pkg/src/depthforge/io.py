"""On-disk formats: 16-bit PNGs, CSV samples, JSON documents.

Depth PNGs are single-channel 16-bit grayscale; stored value 0 means
invalid, otherwise meters = value * scale (default scale 1/1000, i.e.
millimeters). Label PNGs are 16-bit with 0 = unlabeled. Samples travel as
CSV with header ``u,v,depth_m``. All JSON is written with sorted keys so
repeated runs are byte-identical.
"""

from __future__ import annotations

import csv
import hashlib
import json

import numpy as np
from PIL import Image

from .core import CameraIntrinsics, DepthMap, LabelMap, SparseSamples
from .errors import InputError

__all__ = [
    "DEFAULT_DEPTH_SCALE",
    "file_digest",
    "read_cdf_csv",
    "read_depth_png",
    "read_intrinsics_json",
    "read_json",
    "read_label_png",
    "read_samples_csv",
    "write_cdf_csv",
    "write_depth_png",
    "write_intrinsics_json",
    "write_json",
    "write_label_png",
    "write_samples_csv",
]

DEFAULT_DEPTH_SCALE = 1.0 / 1000.0


def _read_png16(path) -> np.ndarray:
    img = Image.open(path)
    arr = np.asarray(img)
    if arr.ndim != 2:
        raise InputError(f"{path}: expected a single-channel image, got shape {arr.shape}")
    return arr.astype(np.uint16) if arr.dtype != np.uint16 else arr


def read_depth_png(path, scale: float = DEFAULT_DEPTH_SCALE) -> DepthMap:
    if scale <= 0:
        raise InputError(f"depth scale must be > 0, got {scale}")
    raw = _read_png16(path)
    validity = raw != 0
    return DepthMap(np.where(validity, raw.astype(np.float64) * scale, 0.0), validity)


def write_depth_png(path, depth: DepthMap, scale: float = DEFAULT_DEPTH_SCALE) -> None:
    if scale <= 0:
        raise InputError(f"depth scale must be > 0, got {scale}")
    quantized = np.round(depth.values / scale)
    bad_high = depth.validity & (quantized > 65535)
    bad_low = depth.validity & (quantized < 1)
    if bad_high.any():
        worst = depth.values[bad_high].max()
        raise InputError(f"depth {worst:.4g} m exceeds 16-bit range at scale {scale}")
    if bad_low.any():
        raise InputError(f"valid depth below half the scale quantum {scale}; not representable")
    out = np.where(depth.validity, quantized, 0).astype(np.uint16)
    Image.fromarray(out).save(path, format="PNG")


def read_label_png(path) -> LabelMap:
    return LabelMap(_read_png16(path).astype(np.int32))


def write_label_png(path, labels: LabelMap) -> None:
    arr = labels.labels
    if arr.max(initial=0) > 65535:
        raise InputError("label ids beyond 16-bit range")
    Image.fromarray(arr.astype(np.uint16)).save(path, format="PNG")


def read_samples_csv(path) -> SparseSamples:
    us, vs, ds = [], [], []
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["u", "v", "depth_m"]:
            raise InputError(f"{path}: expected header 'u,v,depth_m', got {header}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                us.append(int(row[0]))
                vs.append(int(row[1]))
                ds.append(float(row[2]))
            except (ValueError, IndexError) as e:
                raise InputError(f"{path}:{lineno}: bad sample row {row}") from e
    return SparseSamples(np.array(us, np.int64), np.array(vs, np.int64), np.array(ds))


def write_samples_csv(path, samples: SparseSamples) -> None:
    with open(path, "w", newline="") as f:
        f.write("u,v,depth_m\n")
        for u, v, d in zip(samples.u, samples.v, samples.depth):
            f.write(f"{int(u)},{int(v)},{float(d)!r}\n")


def read_json(path) -> dict:
    with open(path) as f:
        try:
            return json.load(f)
        except json.JSONDecodeError as e:
            raise InputError(f"{path}: invalid JSON ({e})") from e


def write_json(path, payload: dict) -> None:
    with open(path, "w") as f:
        json.dump(payload, f, indent=2, sort_keys=True)
        f.write("\n")


def read_intrinsics_json(path) -> CameraIntrinsics:
    return CameraIntrinsics.from_dict(read_json(path))


def write_intrinsics_json(path, intrinsics: CameraIntrinsics) -> None:
    write_json(path, intrinsics.to_dict())


def write_cdf_csv(path, thresholds, fractions) -> None:
    with open(path, "w", newline="") as f:
        f.write("threshold,fraction\n")
        for t, frac in zip(thresholds, fractions):
            f.write(f"{float(t)!r},{float(frac)!r}\n")


def read_cdf_csv(path):
    ts, fs = [], []
    with open(path, newline="") as f:
        reader = csv.reader(f)
        next(reader)
        for row in reader:
            if row:
                ts.append(float(row[0]))
                fs.append(float(row[1]))
    return np.array(ts), np.array(fs)


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()
