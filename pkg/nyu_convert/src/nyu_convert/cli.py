"""Command line: nyu-convert --in <archive> --out <dir> [--frames a:b]."""

from __future__ import annotations

import json
import sys

import click

from .convert import ConversionError, ConversionSpec, convert


def _parse_frames(text: str | None) -> slice:
    if not text:
        return slice(None)
    parts = text.split(":")
    if len(parts) != 2:
        raise ConversionError(f"--frames expects 'a:b', got '{text}'")
    start = int(parts[0]) if parts[0] else None
    stop = int(parts[1]) if parts[1] else None
    return slice(start, stop)


@click.command()
@click.option("--in", "archive", required=True, type=click.Path(exists=True), help="Labeled archive (.mat, v7.3).")
@click.option("--out", "output_dir", required=True, type=click.Path(), help="Output directory.")
@click.option("--frames", default=None, help="Frame range a:b (half-open).")
@click.option("--mode", type=click.Choice(["class", "instance"]), default="class", show_default=True,
              help="Write class ids or one id per object instance.")
@click.option("--intrinsics", "intrinsics_path", type=click.Path(exists=True), default=None,
              help="JSON with source fx/fy/cx/cy (defaults to the dataset's color camera).")
def cli(archive, output_dir, frames, mode, intrinsics_path):
    """Convert the NYU-Depth-v2 labeled archive to per-frame PNGs."""
    intrinsics = None
    if intrinsics_path:
        with open(intrinsics_path) as f:
            intrinsics = json.load(f)
    spec = ConversionSpec(
        archive=archive,
        output_dir=output_dir,
        frames=_parse_frames(frames),
        label_mode=mode,
        intrinsics=intrinsics,
    )
    summary = convert(spec)
    click.echo(f"wrote {len(summary['frames'])} frames to {summary['output_dir']}")


def main(argv=None):
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.exceptions.Exit as e:
        sys.exit(e.exit_code)
    except click.ClickException as e:
        e.show()
        sys.exit(1)
    except (ConversionError, OSError, ValueError) as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(1)
    sys.exit(0)


if __name__ == "__main__":
    main()
