"""Converted output must be consumable by the calibration pipeline.

The two packages only share file formats, so the integration runs the
``depthforge`` CLI as a subprocess on a converted synthetic archive.
"""

from __future__ import annotations

import json
import shutil
import subprocess
import sys

import pytest

from nyu_convert import ConversionSpec, convert

from test_convert import write_archive

HAVE_DEPTHFORGE = shutil.which("depthforge") is not None


def run_depthforge(*args):
    return subprocess.run(["depthforge", *args], capture_output=True, text=True)


@pytest.mark.skipif(not HAVE_DEPTHFORGE, reason="depthforge CLI not installed")
def test_converted_files_run_through_pipeline(tmp_path):
    archive = write_archive(tmp_path / "a.mat", n_frames=1)
    convert(ConversionSpec(str(archive), str(tmp_path / "out")))
    out = tmp_path / "out"

    proc = run_depthforge(
        "sample", "--truth", str(out / "depth" / "0000.png"),
        "--count", "40", "--seed", "1", "--out", str(tmp_path / "samples.csv"),
    )
    assert proc.returncode == 0, proc.stderr

    config = {
        "mode": "smd",
        "intrinsics": json.loads((out / "intrinsics.json").read_text()),
        "paths": {
            "prediction": str(out / "depth" / "0000.png"),
            "truth": str(out / "depth" / "0000.png"),
            "labels": str(out / "labels" / "0000.png"),
            "samples": str(tmp_path / "samples.csv"),
            "output_dir": str(tmp_path / "run"),
        },
        "arap": {"max_iterations": 5},
    }
    (tmp_path / "config.json").write_text(json.dumps(config))
    proc = run_depthforge("run", "--config", str(tmp_path / "config.json"))
    assert proc.returncode == 0, proc.stderr
    metrics = json.loads((tmp_path / "run" / "metrics.json").read_text())
    # prediction equals truth, so calibration must keep it perfect
    assert metrics["mae"] <= 1e-6
    assert metrics["delta1"] == 100.0
