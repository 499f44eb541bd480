"""Acceptance suite: one test per top-level criterion, at stated tolerances.

Run with ``pytest tests/test_acceptance.py -v -s`` to see one PASS line per
criterion. The dataset-conversion criterion lives in the converter package's
own test suite (``nyu_convert``).
"""

from __future__ import annotations

import json
import time
from pathlib import Path

import numpy as np
import pytest

from depthforge import (
    ArapConfig,
    CameraIntrinsics,
    DepthCalibrator,
    EdgeMap,
    PerturbSpec,
    Plane,
    cotangent_weights,
    deform,
    edge_weighted_loss,
    evaluate,
    l1_loss,
    perturb,
    sample_uniform,
    synth_scene,
    triangulate_delaunay,
    unproject,
)
from depthforge import io as dfio
from depthforge.core import DepthMap, project
from depthforge.meshing import AnchorSet
from depthforge.metrics import comparison_table, format_comparison
from depthforge.pipeline import PipelineConfig, run_complete

from conftest import height_field_mesh, make_depth, random_rotation
from test_arap import cot_weight_oracle, joint_minimizer_oracle, mesh_from, SQ3
from test_meshing import circumcircle_ok

REFERENCE_FILE = Path(__file__).resolve().parent.parent / "data" / "reference_nyu200.json"


@pytest.fixture(scope="module")
def synthetic_run():
    """Shared 304x228 three-plane scene with per-object bias and smooth error,
    calibrated in smd/gmd/none modes; used by several criteria."""
    intr = CameraIntrinsics(fx=260.0, fy=260.0, cx=151.5, cy=113.5)
    planes = [
        Plane((0.35, 0.05, 1.0), 2.2),
        Plane((-0.30, 0.10, 1.0), 2.0),
        Plane((0.02, -0.40, 1.0), 1.8),
    ]
    scene = synth_scene(planes, intr, size=(304, 228))
    samples = sample_uniform(scene.truth, 200, seed=11)
    prediction = perturb(
        scene.truth,
        PerturbSpec(amplitude=0.05, wavelength=60.0, object_bias={1: 0.1, 2: 0.2, 3: 0.3}),
        seed=5,
        labels=scene.labels,
    )
    t0 = time.perf_counter()
    smd = DepthCalibrator(intrinsics=intr, mode="smd", max_iterations=40)
    smd_out = smd.fit_transform(prediction, samples, labels=scene.labels)
    gmd_out = DepthCalibrator(intrinsics=intr, mode="gmd", max_iterations=40).fit_transform(
        prediction, samples
    )
    elapsed = time.perf_counter() - t0
    return {
        "scene": scene,
        "samples": samples,
        "prediction": prediction,
        "smd": smd_out,
        "gmd": gmd_out,
        "elapsed": elapsed,
    }


def test_projection_round_trip():
    """10^4 random (pixel, depth, intrinsics) triples: project(unproject(.))
    returns the source within 1e-9, in under a second."""
    rng = np.random.default_rng(42)
    t0 = time.perf_counter()
    checked = 0
    for _ in range(100):
        intr = CameraIntrinsics(
            fx=float(rng.uniform(50, 800)),
            fy=float(rng.uniform(50, 800)),
            cx=float(rng.uniform(0, 640)),
            cy=float(rng.uniform(0, 480)),
        )
        values = rng.uniform(0.1, 90.0, size=(32, 32))
        depth = make_depth(values)
        pixels = np.column_stack([rng.integers(0, 32, 100), rng.integers(0, 32, 100)])
        pixels = np.unique(pixels, axis=0)
        cloud = unproject(depth, intr, pixels)
        u, v, d = project(cloud.points, intr)
        assert np.abs(u - pixels[:, 0]).max() < 1e-9
        assert np.abs(v - pixels[:, 1]).max() < 1e-9
        assert np.abs(d - values[pixels[:, 1], pixels[:, 0]]).max() < 1e-9
        checked += pixels.shape[0]
    elapsed = time.perf_counter() - t0
    assert checked >= 9000
    assert elapsed < 1.0
    print(f"PASS projection round trip: {checked} triples, {elapsed:.3f} s")


def test_cotangent_weights_exact_and_brute_force():
    """Equilateral pair = 1/sqrt(3) within 1e-12; right-angle pair = 0
    exactly; 100 random pairs match direct angle computation within 1e-10."""
    mesh = mesh_from(
        [[0, 0, 0], [1, 0, 0], [0.5, SQ3 / 2, 0], [0.5, -SQ3 / 2, 0]],
        [[0, 1, 2], [0, 1, 3]],
    )
    w = cotangent_weights(mesh)
    row = np.nonzero((w.edges == [0, 1]).all(axis=1))[0][0]
    assert abs(w.weights[row] - 1.0 / SQ3) < 1e-12

    square = mesh_from([[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0]], [[0, 1, 2], [0, 2, 3]])
    ws = cotangent_weights(square)
    diag = np.nonzero((ws.edges == [0, 2]).all(axis=1))[0][0]
    assert ws.weights[diag] == 0.0

    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(100):
        pts = rng.uniform(-1, 1, (4, 3))
        pair = mesh_from(pts, [[0, 1, 2], [0, 1, 3]])
        got = cotangent_weights(pair)
        oracle = cot_weight_oracle(pair)
        for r, (i, j) in enumerate(got.edges):
            worst = max(worst, abs(got.weights[r] - oracle[(i, j)]))
    assert worst < 1e-10
    print(f"PASS cotangent weights: exact cases ok, brute-force max dev {worst:.2e}")


def test_delaunay_empty_circumcircle():
    """50 random point sets (n <= 200): every triangle passes the brute-force
    empty-circumcircle check, in under 10 s."""
    rng = np.random.default_rng(3)
    t0 = time.perf_counter()
    for trial in range(50):
        n = int(rng.integers(3, 201))
        pts = rng.uniform(0, 10, (n, 2))
        tris = triangulate_delaunay(pts)
        assert circumcircle_ok(pts, tris), f"trial {trial} (n={n}) failed"
    elapsed = time.perf_counter() - t0
    assert elapsed < 10.0
    print(f"PASS delaunay: 50 sets verified, {elapsed:.2f} s")


def test_arap_energy_monotonicity():
    """20 random grid meshes (<= 2500 vertices, 5% anchors, random targets):
    per-iteration energy never rises beyond 1e-10 relative slack, < 30 s."""
    rng = np.random.default_rng(19)
    t0 = time.perf_counter()
    for trial in range(20):
        w = int(rng.integers(12, 51))
        h = int(rng.integers(12, 51))
        amp = float(rng.uniform(0.1, 0.4))
        fu = float(rng.uniform(0.05, 0.25))
        fv = float(rng.uniform(0.05, 0.25))
        mesh = height_field_mesh(
            w, h, fn=lambda u, v: 3.0 + amp * np.sin(fu * u) + 0.8 * amp * np.cos(fv * v)
        )
        n = mesh.n_vertices
        assert n <= 2500
        k = max(3, int(0.05 * n))
        idx = rng.choice(n, size=k, replace=False)
        targets = mesh.vertices[idx] + rng.normal(0, 0.1, (k, 3))
        result = deform(mesh, AnchorSet(idx, targets), ArapConfig(max_iterations=50))
        trace = result.energy_trace
        assert np.all(np.diff(trace) <= 1e-10 * trace[0]), f"trial {trial} rose"
    elapsed = time.perf_counter() - t0
    assert elapsed < 30.0
    print(f"PASS arap monotonicity: 20 meshes, {elapsed:.1f} s")


def test_rigid_motion_recovery():
    """20 trials: targets under a random rigid transform with >= 3
    non-collinear anchors bring every vertex within 1e-6 of the transform,
    final energy <= 1e-10."""
    rng = np.random.default_rng(29)
    for trial in range(20):
        mesh = height_field_mesh(
            6, 6, fn=lambda u, v: 2.0 + 0.3 * np.sin(0.9 * u) + 0.25 * np.cos(0.8 * v)
        )
        q = random_rotation(rng)
        t = rng.uniform(-1, 1, 3)
        idx = np.array([0, 5, 30, 35, 14, 21])  # corners + interior
        anchors = AnchorSet(idx, mesh.vertices[idx] @ q.T + t)
        result = deform(mesh, anchors, ArapConfig(max_iterations=3000, rel_energy_tol=1e-15))
        expected = mesh.vertices @ q.T + t
        assert result.final_energy <= 1e-10, f"trial {trial}: E={result.final_energy:.2e}"
        dev = np.abs(result.positions - expected).max()
        assert dev < 1e-6, f"trial {trial}: dev={dev:.2e}"
    print("PASS rigid-motion recovery: 20 trials")


def test_small_instance_generic_minimizer():
    """10 instances with <= 12 vertices: final energy within 1e-6 relative of
    a joint L-BFGS minimizer over free positions and rotation vectors."""
    for seed in range(10):
        rng = np.random.default_rng(seed)
        mesh = height_field_mesh(
            3, 3, fn=lambda u, v: 2.0 + 0.5 * np.sin(1.3 * u) + 0.4 * np.cos(1.1 * v)
        )
        idx = np.array([0, 2, 6, 8])
        targets = mesh.vertices[idx] + rng.normal(0, 0.05, (4, 3))
        anchors = AnchorSet(idx, targets)
        result = deform(mesh, anchors, ArapConfig(max_iterations=4000, rel_energy_tol=1e-16))
        oracle = joint_minimizer_oracle(mesh, anchors, result.positions, result.final_energy, seed)
        gap = result.final_energy - oracle
        assert gap <= 1e-6 * max(oracle, 1e-12), f"seed {seed}: gap {gap:.2e} vs oracle {oracle:.2e}"
    print("PASS small-instance oracle: 10 instances")


def test_anchor_pixel_exactness(synthetic_run):
    """Hard constraints + vertex writeback: the regenerated depth at every
    sampled pixel equals the sample within 1e-9."""
    samples = synthetic_run["samples"]
    out = synthetic_run["smd"]
    dev = np.abs(out.values[samples.v, samples.u] - samples.depth).max()
    assert dev < 1e-9
    print(f"PASS anchor exactness: 200 samples, max dev {dev:.2e}")


def test_end_to_end_synthetic_improvement(synthetic_run):
    """3-object slanted-plane scene, per-object bias 0.1-0.3 m plus a 0.05 m
    smooth field, 200 samples: MAE(smd) < MAE(gmd) < MAE(none) and smd cuts
    MAE by at least half; the two calibrations run in under 60 s."""
    truth = synthetic_run["scene"].truth
    mae_none = evaluate(truth, synthetic_run["prediction"]).mae
    mae_smd = evaluate(truth, synthetic_run["smd"]).mae
    mae_gmd = evaluate(truth, synthetic_run["gmd"]).mae
    assert mae_smd < mae_gmd < mae_none
    assert mae_smd <= 0.5 * mae_none
    assert synthetic_run["elapsed"] < 60.0
    print(
        f"PASS end-to-end: MAE none {mae_none:.4f} > gmd {mae_gmd:.4f} > smd {mae_smd:.4f}"
        f" ({100 * (1 - mae_smd / mae_none):.1f}% reduction, {synthetic_run['elapsed']:.1f} s)"
    )


def test_metrics_thresholds_and_reference():
    """Hand-computed delta cases, rmse >= mae on 100 random maps, and the
    reference-numbers file produces a comparison table."""
    r12 = evaluate(make_depth(np.full((3, 3), 2.0)), make_depth(np.full((3, 3), 2.4)))
    assert r12.delta1 == 100.0
    r13 = evaluate(make_depth(np.array([[2.0]])), make_depth(np.array([[2.6]])))
    assert r13.delta1 == 0.0 and r13.delta2 == 100.0
    rng = np.random.default_rng(1)
    for _ in range(100):
        a = make_depth(rng.uniform(0.5, 6.0, (8, 8)))
        b = make_depth(rng.uniform(0.5, 6.0, (8, 8)))
        rep = evaluate(a, b)
        assert rep.rmse >= rep.mae - 1e-12
    reference = json.loads(REFERENCE_FILE.read_text())
    rows = comparison_table(r12, reference)
    table = format_comparison(rows)
    assert {"smd", "gmd"} <= {r["name"] for r in rows}
    assert "smd" in table
    print("PASS metrics: delta cases, rmse>=mae x100, reference table ingested")


def test_edge_weighted_loss_collapse_and_linearity():
    """alpha = 1 equals plain L1 within 1e-12; two evaluations predict a
    third by linearity within 1e-9."""
    rng = np.random.default_rng(13)
    for _ in range(5):
        truth = make_depth(rng.uniform(1, 5, (12, 12)))
        pred = make_depth(rng.uniform(1, 5, (12, 12)))
        edges = EdgeMap(rng.random((12, 12)) < 0.25)
        collapse = edge_weighted_loss(truth, pred, edges, alpha=1.0)
        assert abs(collapse.edge_weighted - l1_loss(truth, pred)) <= 1e-12 * max(collapse.l1, 1.0)
        v2 = edge_weighted_loss(truth, pred, edges, alpha=2.0).edge_weighted
        v7 = edge_weighted_loss(truth, pred, edges, alpha=7.0).edge_weighted
        b = (v7 - v2) / 5.0
        a = v2 - 2.0 * b
        v11 = edge_weighted_loss(truth, pred, edges, alpha=11.0).edge_weighted
        assert abs(v11 - (a + 11.0 * b)) < 1e-9
    print("PASS edge-weighted loss: alpha=1 collapse and alpha-linearity")


def test_determinism_byte_identical(tmp_path):
    """Two seeded end-to-end runs write byte-identical outputs."""
    intr = CameraIntrinsics(fx=80.0, fy=80.0, cx=23.5, cy=17.5)
    planes = [Plane((0.3, 0.02, 1.0), 2.0), Plane((-0.3, 0.03, 1.0), 2.0)]
    scene = synth_scene(planes, intr, size=(48, 36))
    dfio.write_depth_png(tmp_path / "truth.png", scene.truth)
    dfio.write_label_png(tmp_path / "labels.png", scene.labels)
    truth = dfio.read_depth_png(tmp_path / "truth.png")
    prediction = perturb(
        truth, PerturbSpec(amplitude=0.02, wavelength=24.0, object_bias={1: 0.12, 2: -0.08}),
        seed=3, labels=scene.labels,
    )
    dfio.write_depth_png(tmp_path / "prediction.png", prediction)
    dfio.write_samples_csv(tmp_path / "samples.csv", sample_uniform(truth, 50, seed=21))
    doc = {
        "mode": "smd",
        "intrinsics": intr.to_dict(),
        "paths": {
            "prediction": str(tmp_path / "prediction.png"),
            "truth": str(tmp_path / "truth.png"),
            "labels": str(tmp_path / "labels.png"),
            "samples": str(tmp_path / "samples.csv"),
        },
        "arap": {"max_iterations": 50},
    }
    outputs = []
    for run_dir in ("run_a", "run_b"):
        doc["paths"]["output_dir"] = str(tmp_path / run_dir)
        run_complete(PipelineConfig.from_dict(doc))
        outputs.append(
            {
                name: (tmp_path / run_dir / name).read_bytes()
                for name in ("calibrated.png", "metrics.json", "cdf.csv")
            }
        )
    assert outputs[0] == outputs[1]
    print("PASS determinism: byte-identical calibrated.png, metrics.json, cdf.csv")
