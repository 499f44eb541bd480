"""End-to-end orchestration: configuration, single-image runs, batch runs.

A run loads the prediction (plus samples, labels, optionally truth), applies
the configured calibration mode through ``DepthCalibrator``, writes the
calibrated depth map and reports, and records a manifest with input digests
and per-group statistics so runs are auditable and reproducible.
"""

from __future__ import annotations

import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import io, metrics
from .calibrator import DepthCalibrator
from .core import CameraIntrinsics, DepthMap
from .errors import ConfigError, InputError
from .meshing import write_obj
from .sampler import Box, Plane, SynthScene, synth_scene

__all__ = [
    "PipelineConfig",
    "RunResult",
    "run_batch",
    "run_complete",
    "scene_from_dict",
]

CONFIG_SCHEMA_VERSION = 1
WORKERS_ENV = "DEPTHFORGE_WORKERS"

DEFAULT_CDF_THRESHOLDS = tuple(np.round(np.linspace(0.0, 1.0, 101), 6).tolist())


@dataclass
class PipelineConfig:
    """Everything a run needs. Built from a JSON document plus overrides."""

    mode: str = "smd"
    intrinsics: CameraIntrinsics | None = None
    prediction: str | None = None
    truth: str | None = None
    labels: str | None = None
    samples: str | None = None
    output_dir: str | None = None
    depth_scale: float = io.DEFAULT_DEPTH_SCALE
    # mesh construction
    connectivity: str = "grid"
    stride: int = 1
    vertex_budget: int = 100_000
    # deformation
    constraint_mode: str = "hard"
    max_iterations: int = 100
    rel_energy_tol: float = 1e-6
    soft_weight: float = 1e4
    weight_clamp_floor: float | None = None
    # regeneration
    regen_mode: str = "vertex-writeback"
    # edges / loss
    edge_method: str = "canny"
    edge_sigma: float = 1.0
    edge_low: float = 0.1
    edge_high: float = 0.2
    loss_alpha: float = 100.0
    # sampling
    sample_count: int = 200
    sample_seed: int = 0
    cdf_thresholds: tuple = DEFAULT_CDF_THRESHOLDS
    dump_meshes: bool = False
    dump_energy_traces: bool = False

    def __post_init__(self):
        if self.mode not in ("smd", "gmd", "none"):
            raise ConfigError(f"unknown mode '{self.mode}'")
        if self.depth_scale <= 0:
            raise ConfigError(f"depth_scale must be > 0, got {self.depth_scale}")

    @classmethod
    def from_dict(cls, doc: dict) -> "PipelineConfig":
        doc = dict(doc)
        kwargs: dict = {}
        paths = doc.pop("paths", {})
        for key in ("prediction", "truth", "labels", "samples", "output_dir"):
            if key in paths:
                kwargs[key] = paths[key]
        if "intrinsics" in doc:
            kwargs["intrinsics"] = CameraIntrinsics.from_dict(doc.pop("intrinsics"))
        nested = {
            "mesh": ("connectivity", "stride", "vertex_budget"),
            "arap": (
                "constraint_mode",
                "max_iterations",
                "rel_energy_tol",
                "soft_weight",
                "weight_clamp_floor",
            ),
            "regen": ("regen_mode",),
            "edges": ("edge_method", "edge_sigma", "edge_low", "edge_high", "loss_alpha"),
            "sampler": ("sample_count", "sample_seed"),
        }
        alias = {
            "regen": {"mode": "regen_mode"},
            "edges": {
                "method": "edge_method",
                "sigma": "edge_sigma",
                "low": "edge_low",
                "high": "edge_high",
                "alpha": "loss_alpha",
            },
            "sampler": {"count": "sample_count", "seed": "sample_seed"},
        }
        for section, keys in nested.items():
            block = doc.pop(section, {})
            for raw_key, value in block.items():
                key = alias.get(section, {}).get(raw_key, raw_key)
                if key not in keys:
                    raise ConfigError(f"unknown key '{raw_key}' in config section '{section}'")
                kwargs[key] = value
        for key, value in doc.items():
            if key == "cdf_thresholds":
                kwargs[key] = tuple(value)
            elif hasattr(cls, key) or key in cls.__dataclass_fields__:
                kwargs[key] = value
            else:
                raise ConfigError(f"unknown config key '{key}'")
        return cls(**kwargs)

    @classmethod
    def from_file(cls, path, overrides=()) -> "PipelineConfig":
        doc = io.read_json(path)
        doc = apply_overrides(doc, overrides)
        return cls.from_dict(doc)

    def snapshot(self) -> dict:
        out = {}
        for name, value in self.__dict__.items():
            if isinstance(value, CameraIntrinsics):
                value = value.to_dict()
            elif isinstance(value, tuple):
                value = list(value)
            out[name] = value
        out["config_schema_version"] = CONFIG_SCHEMA_VERSION
        return out


def apply_overrides(doc: dict, overrides) -> dict:
    """Apply ``section.key=value`` strings onto a config document; values are
    parsed as JSON when possible, kept as strings otherwise."""
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override '{item}' is not of the form key=value")
        key, raw = item.split("=", 1)
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        node = doc
        parts = key.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigError(f"override '{item}' descends into a non-mapping")
        node[parts[-1]] = value
    return doc


@dataclass
class RunResult:
    calibrated: DepthMap
    report: metrics.MetricsReport | None
    manifest: dict
    outputs: dict = field(default_factory=dict)


def _calibrator_from_config(config: PipelineConfig) -> DepthCalibrator:
    return DepthCalibrator(
        intrinsics=config.intrinsics,
        mode=config.mode,
        connectivity=config.connectivity,
        stride=config.stride,
        vertex_budget=config.vertex_budget,
        constraint_mode=config.constraint_mode,
        max_iterations=config.max_iterations,
        rel_energy_tol=config.rel_energy_tol,
        soft_weight=config.soft_weight,
        weight_clamp_floor=config.weight_clamp_floor,
        regen_mode=config.regen_mode,
    )


def run_complete(
    config: PipelineConfig,
    prediction: DepthMap | None = None,
    samples=None,
    labels=None,
    truth: DepthMap | None = None,
    stem: str | None = None,
) -> RunResult:
    """Run one image through the configured mode.

    Inputs may be passed in memory; anything not passed is loaded from the
    configured paths. Outputs are written when ``output_dir`` is set.
    """
    t0 = time.perf_counter()
    digests = {}

    def load(kind, path, reader):
        if path is None:
            raise ConfigError(f"config is missing the {kind} path")
        digests[kind] = io.file_digest(path)
        return reader(path)

    if prediction is None:
        prediction = load("prediction", config.prediction, lambda p: io.read_depth_png(p, config.depth_scale))
    if samples is None:
        samples = load("samples", config.samples, io.read_samples_csv)
    if config.mode == "smd" and labels is None:
        if config.labels is None:
            raise ConfigError("smd mode requires a labels path")
        labels = load("labels", config.labels, io.read_label_png)
    if truth is None and config.truth is not None:
        truth = load("truth", config.truth, lambda p: io.read_depth_png(p, config.depth_scale))
    if truth is not None and truth.shape != prediction.shape:
        raise InputError(f"truth shape {truth.shape} does not match prediction {prediction.shape}")
    load_time = time.perf_counter() - t0

    t1 = time.perf_counter()
    calibrator = _calibrator_from_config(config)
    if config.mode == "none":
        calibrator.fit(prediction, samples)
    else:
        if config.intrinsics is None:
            raise ConfigError("intrinsics are required and never defaulted; add them to the config")
        calibrator.fit(prediction, samples, labels=labels)
    calibrated = calibrator.transform()
    solve_time = time.perf_counter() - t1

    report = metrics.evaluate(truth, calibrated) if truth is not None else None

    manifest = {
        "stem": stem,
        "inputs": digests,
        "config": config.snapshot(),
        "groups": calibrator.group_stats_,
        "residual_pixels": calibrator.residual_pixel_count_,
        "warnings": calibrator.warnings_,
        "timing_s": {"load": load_time, "solve": solve_time},
    }

    outputs = {}
    if config.output_dir is not None:
        out = Path(config.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        prefix = f"{stem}_" if stem else ""
        depth_path = out / f"{prefix}calibrated.png"
        io.write_depth_png(depth_path, calibrated, config.depth_scale)
        outputs["calibrated"] = str(depth_path)
        if report is not None:
            metrics_path = out / f"{prefix}metrics.json"
            io.write_json(metrics_path, report.to_dict())
            outputs["metrics"] = str(metrics_path)
            cdf_path = out / f"{prefix}cdf.csv"
            fractions = metrics.cdf(truth, calibrated, config.cdf_thresholds)
            io.write_cdf_csv(cdf_path, config.cdf_thresholds, fractions)
            outputs["cdf"] = str(cdf_path)
        if config.dump_meshes:
            for group in calibrator.groups_:
                mesh_path = out / f"{prefix}group{group.label:04d}.obj"
                write_obj(group.mesh, mesh_path, positions=group.deformation.positions)
                outputs[f"mesh_{group.label}"] = str(mesh_path)
        if config.dump_energy_traces:
            for group in calibrator.groups_:
                trace_path = out / f"{prefix}group{group.label:04d}_energy.csv"
                with open(trace_path, "w") as f:
                    f.write("iteration,energy\n")
                    for k, e in enumerate(group.deformation.energy_trace, start=1):
                        f.write(f"{k},{float(e)!r}\n")
                outputs[f"energy_{group.label}"] = str(trace_path)
        manifest_path = out / f"{prefix}manifest.json"
        io.write_json(manifest_path, manifest)
        outputs["manifest"] = str(manifest_path)

    return RunResult(calibrated=calibrated, report=report, manifest=manifest, outputs=outputs)


def _worker_count() -> int:
    raw = os.environ.get(WORKERS_ENV, "")
    try:
        n = int(raw)
    except ValueError:
        n = 0
    return max(1, n or min(8, os.cpu_count() or 1))


def run_batch(config: PipelineConfig) -> dict:
    """Process a directory of images: config paths point at directories whose
    files are matched by stem. Aggregates per-image metrics as plain means.
    """
    pred_dir = Path(config.prediction or "")
    if not pred_dir.is_dir():
        raise ConfigError(f"batch mode expects a prediction directory, got '{config.prediction}'")
    stems = sorted(p.stem for p in pred_dir.glob("*.png"))
    if not stems:
        raise InputError(f"no PNG predictions found in {pred_dir}")

    def paths_for(stem: str) -> PipelineConfig:
        cfg = PipelineConfig(**{**config.__dict__})
        cfg.prediction = str(pred_dir / f"{stem}.png")
        for attr in ("truth", "labels", "samples"):
            base = getattr(config, attr)
            if base is not None:
                ext = ".csv" if attr == "samples" else ".png"
                candidate = Path(base) / f"{stem}{ext}"
                if not candidate.exists():
                    raise InputError(f"missing {attr} file for stem '{stem}': {candidate}")
                setattr(cfg, attr, str(candidate))
        return cfg

    results: dict[str, RunResult] = {}
    with ThreadPoolExecutor(max_workers=_worker_count()) as pool:
        futures = {stem: pool.submit(run_complete, paths_for(stem), stem=stem) for stem in stems}
        for stem in stems:  # fixed order: output and aggregation are deterministic
            results[stem] = futures[stem].result()

    summary: dict = {"images": len(stems), "per_image": {}}
    reports = []
    for stem in stems:
        res = results[stem]
        if res.report is not None:
            reports.append(res.report)
            summary["per_image"][stem] = res.report.to_dict()
    if reports:
        agg = {
            key: float(np.mean([r.to_dict()[key] for r in reports]))
            for key in ("rmse", "mae", "rel", "delta1", "delta2", "delta3")
        }
        agg["pixel_count"] = int(sum(r.pixel_count for r in reports))
        summary["mean"] = agg
    if config.output_dir is not None:
        io.write_json(Path(config.output_dir) / "batch_summary.json", summary)
    return summary


def scene_from_dict(doc: dict) -> SynthScene:
    """Build a synthetic scene from its JSON description."""
    try:
        size = tuple(doc["size"])
        intr = CameraIntrinsics.from_dict(doc["intrinsics"])
        objects = doc["objects"]
    except KeyError as e:
        raise ConfigError(f"scene document missing key {e}") from e
    descriptors = []
    for i, obj in enumerate(objects):
        kind = obj.get("type")
        if kind == "plane":
            descriptors.append(Plane(tuple(obj["normal"]), float(obj["offset"])))
        elif kind == "box":
            descriptors.append(Box(tuple(obj["min"]), tuple(obj["max"])))
        else:
            raise ConfigError(f"scene object {i}: unknown type '{kind}'")
    return synth_scene(
        descriptors, intr, size, background_depth=doc.get("background_depth")
    )
