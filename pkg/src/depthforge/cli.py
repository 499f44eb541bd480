"""Command-line interface.

Exit codes: 0 on success, 1 for input/configuration errors, 2 for numerical
failures during processing.
"""

from __future__ import annotations

import sys

import click
import numpy as np
from PIL import Image

from . import __version__, io, metrics as metrics_mod, pipeline as pipeline_mod
from .calibrator import DepthCalibrator
from .edgeloss import CannyParams, edge_weighted_loss, label_discontinuity, semantic_edges
from .errors import ConfigError, InputError, NumericalError
from .meshing import write_obj
from .pipeline import CONFIG_SCHEMA_VERSION, PipelineConfig
from .sampler import sample_uniform


def _print_version(ctx, param, value):
    if not value or ctx.resilient_parsing:
        return
    click.echo(f"depthforge {__version__} (config schema v{CONFIG_SCHEMA_VERSION})")
    ctx.exit()


@click.group()
@click.option(
    "--version", is_flag=True, callback=_print_version, expose_value=False, is_eager=True,
    help="Print version and config-schema version.",
)
def cli():
    """Depth-map calibration against sparse depth samples."""


@cli.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--override", "overrides", multiple=True, help="Config override key=value (dotted keys).")
@click.option("--batch", is_flag=True, help="Treat configured paths as directories of files matched by stem.")
def run(config_path, overrides, batch):
    """Run the calibration pipeline end to end."""
    config = PipelineConfig.from_file(config_path, overrides)
    if batch:
        summary = pipeline_mod.run_batch(config)
        if "mean" in summary:
            for key, value in summary["mean"].items():
                click.echo(f"mean {key}: {value:.6f}" if isinstance(value, float) else f"mean {key}: {value}")
        click.echo(f"processed {summary['images']} images")
        return
    result = pipeline_mod.run_complete(config)
    if result.report is not None:
        for key, value in result.report.to_dict().items():
            click.echo(f"{key}: {value:.6f}" if isinstance(value, float) else f"{key}: {value}")
    for kind, path in result.outputs.items():
        click.echo(f"wrote {kind}: {path}")


@cli.command()
@click.option("--labels", "labels_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--method", type=click.Choice(["canny", "discontinuity"]), default="canny")
@click.option("--sigma", default=1.0, show_default=True)
@click.option("--low", default=0.1, show_default=True)
@click.option("--high", default=0.2, show_default=True)
def edges(labels_path, out_path, method, sigma, low, high):
    """Extract semantic edges from a label map into an 8-bit mask PNG."""
    labels = io.read_label_png(labels_path)
    if method == "canny":
        edge_map = semantic_edges(labels, CannyParams(sigma=sigma, low_threshold=low, high_threshold=high))
    else:
        edge_map = label_discontinuity(labels)
    Image.fromarray(edge_map.edge.astype(np.uint8) * 255).save(out_path, format="PNG")
    click.echo(f"{edge_map.count()} edge pixels -> {out_path}")


@cli.command()
@click.option("--truth", "truth_path", required=True, type=click.Path(exists=True))
@click.option("--prediction", "pred_path", required=True, type=click.Path(exists=True))
@click.option("--labels", "labels_path", required=True, type=click.Path(exists=True))
@click.option("--alpha", default=100.0, show_default=True)
@click.option("--method", type=click.Choice(["canny", "discontinuity"]), default="canny")
@click.option("--scale", default=io.DEFAULT_DEPTH_SCALE, show_default=True)
@click.option("--out", "out_path", type=click.Path(), default=None)
def loss(truth_path, pred_path, labels_path, alpha, method, scale, out_path):
    """Evaluate plain and edge-weighted L1 between two depth maps."""
    truth = io.read_depth_png(truth_path, scale)
    prediction = io.read_depth_png(pred_path, scale)
    labels = io.read_label_png(labels_path)
    edge_map = semantic_edges(labels) if method == "canny" else label_discontinuity(labels)
    report = edge_weighted_loss(truth, prediction, edge_map, alpha)
    payload = {
        "l1": report.l1,
        "edge_weighted": report.edge_weighted,
        "alpha": report.alpha,
        "pixel_count": report.pixel_count,
    }
    for key, value in payload.items():
        click.echo(f"{key}: {value}")
    if out_path:
        io.write_json(out_path, payload)


@cli.command()
@click.option("--truth", "truth_path", required=True, type=click.Path(exists=True))
@click.option("--count", default=200, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--scale", default=io.DEFAULT_DEPTH_SCALE, show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path())
def sample(truth_path, count, seed, scale, out_path):
    """Draw sparse samples uniformly from a ground-truth depth map."""
    truth = io.read_depth_png(truth_path, scale)
    samples = sample_uniform(truth, count, seed)
    io.write_samples_csv(out_path, samples)
    click.echo(f"{len(samples)} samples -> {out_path}")


@cli.command()
@click.option("--scene", "scene_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--scale", default=io.DEFAULT_DEPTH_SCALE, show_default=True)
def synth(scene_path, out_dir, scale):
    """Render a synthetic scene description to truth/labels/intrinsics files."""
    from pathlib import Path

    doc = io.read_json(scene_path)
    scene = pipeline_mod.scene_from_dict(doc)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    io.write_depth_png(out / "truth.png", scene.truth, scale)
    io.write_label_png(out / "labels.png", scene.labels)
    io.write_intrinsics_json(out / "intrinsics.json", scene.intrinsics)
    click.echo(f"scene {scene.truth.width}x{scene.truth.height} -> {out}")


@cli.command()
@click.option("--truth", "truth_path", required=True, type=click.Path(exists=True))
@click.option("--prediction", "pred_path", required=True, type=click.Path(exists=True))
@click.option("--scale", default=io.DEFAULT_DEPTH_SCALE, show_default=True)
@click.option("--out", "out_path", type=click.Path(), default=None)
@click.option("--cdf", "cdf_path", type=click.Path(), default=None)
@click.option("--thresholds", default=None, help="Comma-separated CDF thresholds in meters.")
@click.option("--reference", "reference_path", type=click.Path(exists=True), default=None)
def metrics(truth_path, pred_path, scale, out_path, cdf_path, thresholds, reference_path):
    """Evaluate a depth map against ground truth."""
    truth = io.read_depth_png(truth_path, scale)
    prediction = io.read_depth_png(pred_path, scale)
    report = metrics_mod.evaluate(truth, prediction)
    for key, value in report.to_dict().items():
        click.echo(f"{key}: {value:.6f}" if isinstance(value, float) else f"{key}: {value}")
    if out_path:
        io.write_json(out_path, report.to_dict())
    if cdf_path:
        if thresholds:
            ts = [float(t) for t in thresholds.split(",")]
        else:
            ts = list(pipeline_mod.DEFAULT_CDF_THRESHOLDS)
        io.write_cdf_csv(cdf_path, ts, metrics_mod.cdf(truth, prediction, ts))
    if reference_path:
        rows = metrics_mod.comparison_table(report, io.read_json(reference_path))
        click.echo(metrics_mod.format_comparison(rows), nl=False)


@cli.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--deformed/--rest", default=False, help="Export deformed instead of rest positions.")
def meshdump(config_path, out_dir, deformed):
    """Build the configured meshes and write one OBJ per group."""
    from pathlib import Path

    config = PipelineConfig.from_file(config_path, ())
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    calibrator = _fit_for_dump(config, deformed)
    for group in calibrator.groups_:
        positions = group.deformation.positions if deformed else None
        write_obj(group.mesh, out / f"group{group.label:04d}.obj", positions=positions)
    click.echo(f"wrote {len(calibrator.groups_)} meshes -> {out}")


def _rest_only(config: PipelineConfig) -> PipelineConfig:
    cfg = PipelineConfig(**{**config.__dict__})
    cfg.max_iterations = 1
    cfg.output_dir = None
    return cfg


def _fit_for_dump(config: PipelineConfig, deformed: bool) -> DepthCalibrator:
    cfg = config if deformed else _rest_only(config)
    if cfg.prediction is None or cfg.samples is None:
        raise ConfigError("meshdump needs prediction and samples paths in the config")
    prediction = io.read_depth_png(cfg.prediction, cfg.depth_scale)
    samples = io.read_samples_csv(cfg.samples)
    labels = io.read_label_png(cfg.labels) if cfg.labels else None
    calibrator = pipeline_mod._calibrator_from_config(cfg)
    calibrator.fit(prediction, samples, labels=labels)
    return calibrator


def main(argv=None):
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.exceptions.Exit as e:
        sys.exit(e.exit_code)
    except click.ClickException as e:
        e.show()
        sys.exit(1)
    except click.exceptions.Abort:
        sys.exit(1)
    except NumericalError as e:
        click.echo(f"numerical failure: {e}", err=True)
        sys.exit(2)
    except InputError as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(1)
    except OSError as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(1)
    sys.exit(0)


if __name__ == "__main__":
    main()
