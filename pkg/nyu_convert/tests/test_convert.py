"""Converter tests against synthetic archives in the dataset's layout.

The archive builder mimics how the labeled container stores arrays
(column-major, so a frame read through HDF5 arrives transposed). Pinhole
consistency is checked with the formula directly, not through any other
package: x = (u - cx) * d / fx, y = (v - cy) * d / fy.
"""

from __future__ import annotations

import json
import subprocess
import sys
from pathlib import Path

import h5py
import numpy as np
import pytest
from PIL import Image

from nyu_convert import (
    DEFAULT_SOURCE_INTRINSICS,
    TARGET_SIZE,
    ConversionError,
    ConversionSpec,
    convert,
    convert_intrinsics,
    crop_offsets,
)


def write_archive(path, n_frames=2, constant_depth=None, seed=0):
    """Synthetic archive with the labeled container's dataset names and the
    MATLAB transposition convention (stored frame shape is (C, W, H))."""
    rng = np.random.default_rng(seed)
    images = np.zeros((n_frames, 3, 640, 480), dtype=np.uint8)
    depths = np.zeros((n_frames, 640, 480), dtype=np.float32)
    labels = np.zeros((n_frames, 640, 480), dtype=np.uint16)
    instances = np.zeros((n_frames, 640, 480), dtype=np.uint8)
    for i in range(n_frames):
        # frame content defined in (H, W) space, stored transposed
        uu, vv = np.meshgrid(np.arange(640), np.arange(480))
        rgb = np.stack([(uu % 256), (vv % 256), ((uu + vv) % 256)], axis=0).astype(np.uint8)
        if constant_depth is not None:
            depth = np.full((480, 640), constant_depth, dtype=np.float32)
        else:
            depth = (1.0 + 0.002 * uu + 0.003 * vv + 0.1 * (i + 1)).astype(np.float32)
        label = np.zeros((480, 640), dtype=np.uint16)
        label[:, :320] = 3
        label[:, 320:] = 7
        label[100:200, 100:300] = 12
        inst = np.zeros((480, 640), dtype=np.uint8)
        inst[:, :160] = 1  # two instances of class 3
        inst[:, 160:320] = 2
        images[i] = rgb.transpose(0, 2, 1)
        depths[i] = depth.T
        labels[i] = label.T
        instances[i] = inst.T
    with h5py.File(path, "w") as f:
        f.create_dataset("images", data=images)
        f.create_dataset("depths", data=depths)
        f.create_dataset("labels", data=labels)
        f.create_dataset("instances", data=instances)
    return path


def read_png16(path):
    return np.asarray(Image.open(path)).astype(np.uint16)


class TestGeometry:
    def test_target_size_and_depth_round_trip(self, tmp_path):
        """640x480 converts to 304x228 with depth recoverable to 0.5 mm."""
        archive = write_archive(tmp_path / "a.mat", n_frames=1)
        convert(ConversionSpec(str(archive), str(tmp_path / "out")))
        depth_png = read_png16(tmp_path / "out" / "depth" / "0000.png")
        assert depth_png.shape == (TARGET_SIZE[1], TARGET_SIZE[0])

        left, top = crop_offsets()
        uu, vv = np.meshgrid(np.arange(640), np.arange(480))
        source = 1.0 + 0.002 * uu + 0.003 * vv + 0.1
        expected = source[::2, ::2][top : top + 228, left : left + 304]
        decoded = depth_png.astype(np.float64) / 1000.0
        valid = depth_png > 0
        assert valid.all()
        assert np.abs(decoded - expected).max() <= 0.0005 + 1e-12

    def test_rgb_and_label_sizes(self, tmp_path):
        archive = write_archive(tmp_path / "a.mat", n_frames=1)
        convert(ConversionSpec(str(archive), str(tmp_path / "out")))
        rgb = np.asarray(Image.open(tmp_path / "out" / "rgb" / "0000.png"))
        assert rgb.shape == (228, 304, 3)
        labels = read_png16(tmp_path / "out" / "labels" / "0000.png")
        assert labels.shape == (228, 304)

    def test_constant_depth_stays_constant(self, tmp_path):
        archive = write_archive(tmp_path / "a.mat", n_frames=1, constant_depth=2.5)
        convert(ConversionSpec(str(archive), str(tmp_path / "out")))
        decoded = read_png16(tmp_path / "out" / "depth" / "0000.png").astype(float) / 1000.0
        assert np.abs(decoded - 2.5).max() <= 0.001

    def test_label_ids_preserved_exactly(self, tmp_path):
        archive = write_archive(tmp_path / "a.mat", n_frames=1)
        convert(ConversionSpec(str(archive), str(tmp_path / "out")))
        labels = read_png16(tmp_path / "out" / "labels" / "0000.png")
        assert set(np.unique(labels)) <= {3, 7, 12}
        # nearest sampling: converted pixel (u,v) is source pixel (2(u+left), 2(v+top))
        left, top = crop_offsets()
        label_src = np.zeros((480, 640), dtype=np.uint16)
        label_src[:, :320] = 3
        label_src[:, 320:] = 7
        label_src[100:200, 100:300] = 12
        expected = label_src[::2, ::2][top : top + 228, left : left + 304]
        assert np.array_equal(labels, expected)

    def test_intrinsics_consistency(self, tmp_path):
        """Unprojecting a converted pixel with the converted intrinsics lands
        within 1e-6 m of unprojecting the corresponding source pixel."""
        archive = write_archive(tmp_path / "a.mat", n_frames=1)
        convert(ConversionSpec(str(archive), str(tmp_path / "out")))
        converted = json.loads((tmp_path / "out" / "intrinsics.json").read_text())
        source = DEFAULT_SOURCE_INTRINSICS
        left, top = crop_offsets()

        def unproject(u, v, d, k):
            return np.array(
                [(u - k["cx"]) * d / k["fx"], (v - k["cy"]) * d / k["fy"], d]
            )

        rng = np.random.default_rng(5)
        for _ in range(64):
            u = int(rng.integers(0, 304))
            v = int(rng.integers(0, 228))
            d = float(rng.uniform(0.5, 9.0))
            p_conv = unproject(u, v, d, converted)
            p_src = unproject(2 * (u + left), 2 * (v + top), d, source)
            assert np.abs(p_conv - p_src).max() < 1e-6

    def test_rejects_wrong_source_size(self, tmp_path):
        with h5py.File(tmp_path / "bad.mat", "w") as f:
            f.create_dataset("images", data=np.zeros((1, 3, 100, 80), np.uint8))
            f.create_dataset("depths", data=np.zeros((1, 100, 80), np.float32))
            f.create_dataset("labels", data=np.zeros((1, 100, 80), np.uint16))
        with pytest.raises(ConversionError, match="frame 0"):
            convert(ConversionSpec(str(tmp_path / "bad.mat"), str(tmp_path / "out")))


class TestSelection:
    def test_frame_slice(self, tmp_path):
        archive = write_archive(tmp_path / "a.mat", n_frames=4)
        summary = convert(ConversionSpec(str(archive), str(tmp_path / "out"), frames=slice(1, 3)))
        assert summary["frames"] == ["0001", "0002"]
        assert not (tmp_path / "out" / "depth" / "0000.png").exists()

    def test_instance_mode_splits_classes(self, tmp_path):
        archive = write_archive(tmp_path / "a.mat", n_frames=1)
        convert(ConversionSpec(str(archive), str(tmp_path / "cls"), label_mode="class"))
        convert(ConversionSpec(str(archive), str(tmp_path / "inst"), label_mode="instance"))
        cls = read_png16(tmp_path / "cls" / "labels" / "0000.png")
        inst = read_png16(tmp_path / "inst" / "labels" / "0000.png")
        # class 3 spans two instances: instance mode must distinguish them
        assert len(np.unique(inst)) > len(np.unique(cls))
        # instance partition refines the class partition
        for iid in np.unique(inst):
            classes_under = np.unique(cls[inst == iid])
            assert classes_under.size == 1


class TestGeometryOverrides:
    def test_custom_target_size(self, tmp_path):
        archive = write_archive(tmp_path / "a.mat", n_frames=1)
        summary = convert(
            ConversionSpec(str(archive), str(tmp_path / "out"), target_size=(160, 120))
        )
        assert summary["size"] == [160, 120]
        depth = read_png16(tmp_path / "out" / "depth" / "0000.png")
        assert depth.shape == (120, 160)

    def test_crop_must_fit_resized_frame(self, tmp_path):
        with pytest.raises(ConversionError, match="does not fit"):
            ConversionSpec("a.mat", "out", target_size=(400, 228))

    def test_depth_scale_override(self, tmp_path):
        archive = write_archive(tmp_path / "a.mat", n_frames=1, constant_depth=2.5)
        convert(ConversionSpec(str(archive), str(tmp_path / "out"), depth_scale=0.01))
        raw = read_png16(tmp_path / "out" / "depth" / "0000.png")
        assert np.all(raw == 250)  # 2.5 m at 1 cm per unit


class TestErrors:
    def test_not_an_archive(self, tmp_path):
        path = tmp_path / "junk.mat"
        path.write_bytes(b"not hdf5 at all")
        with pytest.raises(ConversionError, match="cannot open"):
            convert(ConversionSpec(str(path), str(tmp_path / "out")))

    def test_missing_dataset(self, tmp_path):
        with h5py.File(tmp_path / "partial.mat", "w") as f:
            f.create_dataset("images", data=np.zeros((1, 3, 640, 480), np.uint8))
        with pytest.raises(ConversionError, match="missing dataset"):
            convert(ConversionSpec(str(tmp_path / "partial.mat"), str(tmp_path / "out")))

    def test_instance_mode_without_instances(self, tmp_path):
        with h5py.File(tmp_path / "noinst.mat", "w") as f:
            f.create_dataset("images", data=np.zeros((1, 3, 640, 480), np.uint8))
            f.create_dataset("depths", data=np.full((1, 640, 480), 2.0, np.float32))
            f.create_dataset("labels", data=np.ones((1, 640, 480), np.uint16))
        with pytest.raises(ConversionError, match="instances"):
            convert(ConversionSpec(str(tmp_path / "noinst.mat"), str(tmp_path / "out"), label_mode="instance"))


class TestCli:
    def test_cli_end_to_end(self, tmp_path):
        archive = write_archive(tmp_path / "a.mat", n_frames=3)
        proc = subprocess.run(
            [
                sys.executable, "-m", "nyu_convert.cli",
                "--in", str(archive), "--out", str(tmp_path / "out"), "--frames", "0:2",
            ],
            capture_output=True,
            text=True,
        )
        assert proc.returncode == 0, proc.stderr
        assert "wrote 2 frames" in proc.stdout
        assert (tmp_path / "out" / "intrinsics.json").exists()

    def test_cli_bad_archive_exit_code(self, tmp_path):
        path = tmp_path / "junk.mat"
        path.write_bytes(b"nope")
        proc = subprocess.run(
            [sys.executable, "-m", "nyu_convert.cli", "--in", str(path), "--out", str(tmp_path / "o")],
            capture_output=True,
            text=True,
        )
        assert proc.returncode == 1
        assert "error" in proc.stderr.lower()
