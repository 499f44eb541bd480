"""Depth-map evaluation: RMSE, MAE, REL, threshold accuracies, error CDF.

Statistics run over pixels valid in both maps and accumulate in double
precision. The delta accuracies use the strict inequality
max(pred/true, true/pred) < 1.25**i and are reported as percentages.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import DepthMap, _freeze
from .errors import InputError, NoOverlapError

__all__ = [
    "ErrorCdf",
    "MetricsReport",
    "cdf",
    "comparison_table",
    "error_cdf",
    "evaluate",
    "format_comparison",
]

DELTA_BASE = 1.25


@dataclass(frozen=True)
class MetricsReport:
    rmse: float
    mae: float
    rel: float
    delta1: float
    delta2: float
    delta3: float
    pixel_count: int

    def to_dict(self) -> dict:
        return {
            "rmse": self.rmse,
            "mae": self.mae,
            "rel": self.rel,
            "delta1": self.delta1,
            "delta2": self.delta2,
            "delta3": self.delta3,
            "pixel_count": self.pixel_count,
        }


@dataclass(frozen=True)
class ErrorCdf:
    """Sorted absolute errors; ``at`` gives the fraction of errors <= t."""

    errors: np.ndarray

    def __post_init__(self):
        e = np.sort(np.asarray(self.errors, dtype=np.float64).ravel())
        if e.size == 0:
            raise InputError("error CDF needs at least one value")
        object.__setattr__(self, "errors", _freeze(e))

    def at(self, thresholds) -> np.ndarray:
        t = np.asarray(thresholds, dtype=np.float64)
        counts = np.searchsorted(self.errors, t, side="right")
        return counts / self.errors.size


def _paired(truth: DepthMap, prediction: DepthMap):
    if truth.shape != prediction.shape:
        raise InputError(f"shape mismatch: truth {truth.shape} vs prediction {prediction.shape}")
    mask = truth.validity & prediction.validity
    if not mask.any():
        raise NoOverlapError("no pixel is valid in both maps")
    return truth.values[mask], prediction.values[mask]


def evaluate(truth: DepthMap, prediction: DepthMap) -> MetricsReport:
    """Full metrics report over mutually valid pixels."""
    y, yhat = _paired(truth, prediction)
    err = yhat - y
    ratio = np.maximum(yhat / y, y / yhat)
    deltas = [100.0 * float((ratio < DELTA_BASE**i).mean()) for i in (1, 2, 3)]
    return MetricsReport(
        rmse=float(np.sqrt(np.mean(err**2))),
        mae=float(np.mean(np.abs(err))),
        rel=float(np.mean(np.abs(err) / y)),
        delta1=deltas[0],
        delta2=deltas[1],
        delta3=deltas[2],
        pixel_count=int(y.size),
    )


def error_cdf(truth: DepthMap, prediction: DepthMap) -> ErrorCdf:
    y, yhat = _paired(truth, prediction)
    return ErrorCdf(np.abs(yhat - y))


def cdf(truth: DepthMap, prediction: DepthMap, thresholds) -> np.ndarray:
    """Fraction of evaluation pixels with absolute error <= each threshold."""
    return error_cdf(truth, prediction).at(thresholds)


def comparison_table(ours: MetricsReport, reference: dict) -> list[dict]:
    """Compare a report against reference rows {name: {mae, rmse, rel, ...}}.

    Produces one row per reference entry with the reference values, our
    values, and our-minus-reference deltas for the metrics both sides carry.
    """
    rows = []
    mine = ours.to_dict()
    for name in sorted(reference):
        entry = reference[name]
        if not isinstance(entry, dict):
            raise InputError(f"reference entry '{name}' must be a mapping of metric values")
        row = {"name": name}
        for metric, ref_val in entry.items():
            if metric not in mine:
                continue
            row[f"{metric}_ref"] = float(ref_val)
            row[f"{metric}_ours"] = float(mine[metric])
            row[f"{metric}_delta"] = float(mine[metric]) - float(ref_val)
        rows.append(row)
    return rows


def format_comparison(rows: list[dict]) -> str:
    """Plain-text table of a comparison_table result."""
    if not rows:
        return "(no reference entries)\n"
    metrics = sorted({k[:-4] for row in rows for k in row if k.endswith("_ref")})
    header = ["method"] + [f"{m}({s})" for m in metrics for s in ("ref", "ours", "diff")]
    lines = ["  ".join(f"{h:>12s}" for h in header)]
    for row in rows:
        cells = [f"{row['name']:>12s}"]
        for m in metrics:
            for s in ("ref", "ours", "delta"):
                val = row.get(f"{m}_{s}")
                cells.append(f"{'-':>12s}" if val is None else f"{val:>12.4f}")
        lines.append("  ".join(cells))
    return "\n".join(lines) + "\n"
