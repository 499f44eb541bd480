"""Estimator-style front door for depth-map calibration.

``DepthCalibrator`` follows the scikit-learn parameter conventions
(constructor stores parameters verbatim, ``get_params``/``set_params``,
fitted state on trailing-underscore attributes) so it drops into pipelines
and grid searches that expect that surface. ``fit`` learns the per-object
deformations from one image's prediction, sparse samples, and labels;
``transform`` regenerates the calibrated depth map.
"""

from __future__ import annotations

import inspect
from dataclasses import replace

import numpy as np

from . import meshing
from .arap import ArapConfig, deform
from .core import DepthMap
from .errors import ConfigError, InputError
from .regen import RegenConfig, regenerate
from .validation import as_depth_map, as_intrinsics, as_label_map, as_samples

__all__ = ["DepthCalibrator"]

MODES = ("smd", "gmd", "none")


class DepthCalibrator:
    """Calibrate a predicted depth map to sparse depth samples.

    Modes: ``smd`` deforms one mesh per labeled object (sharp transitions
    between objects survive), ``gmd`` deforms a single whole-image mesh, and
    ``none`` passes the prediction through untouched.

    Parameters mirror the pipeline configuration; ``vertex_budget`` caps
    per-group mesh size by switching to a subsampled Delaunay mesh when a
    group exceeds it.
    """

    def __init__(
        self,
        intrinsics=None,
        mode: str = "smd",
        connectivity: str = "grid",
        stride: int = 1,
        vertex_budget: int = 100_000,
        constraint_mode: str = "hard",
        max_iterations: int = 100,
        rel_energy_tol: float = 1e-6,
        soft_weight: float = 1e4,
        weight_clamp_floor=None,
        regen_mode: str = "vertex-writeback",
    ):
        self.intrinsics = intrinsics
        self.mode = mode
        self.connectivity = connectivity
        self.stride = stride
        self.vertex_budget = vertex_budget
        self.constraint_mode = constraint_mode
        self.max_iterations = max_iterations
        self.rel_energy_tol = rel_energy_tol
        self.soft_weight = soft_weight
        self.weight_clamp_floor = weight_clamp_floor
        self.regen_mode = regen_mode

    # -- scikit-learn parameter plumbing ------------------------------------

    @classmethod
    def _param_names(cls):
        return [p for p in inspect.signature(cls.__init__).parameters if p != "self"]

    def get_params(self, deep: bool = True) -> dict:
        return {name: getattr(self, name) for name in self._param_names()}

    def set_params(self, **params) -> "DepthCalibrator":
        valid = set(self._param_names())
        for key, value in params.items():
            if key not in valid:
                raise InputError(f"unknown parameter '{key}' for DepthCalibrator")
            setattr(self, key, value)
        return self

    # -- fitting -------------------------------------------------------------

    def _arap_config(self) -> ArapConfig:
        return ArapConfig(
            max_iterations=self.max_iterations,
            rel_energy_tol=self.rel_energy_tol,
            constraint_mode=self.constraint_mode,
            soft_weight=self.soft_weight,
            weight_clamp_floor=self.weight_clamp_floor,
        )

    def _group_stride(self, n_pixels: int) -> tuple[str, int]:
        if self.stride > 1:
            return "delaunay", self.stride
        if n_pixels > self.vertex_budget:
            stride = int(np.ceil(np.sqrt(n_pixels / self.vertex_budget)))
            return "delaunay", stride
        return self.connectivity, 1

    def fit(self, prediction, samples, labels=None) -> "DepthCalibrator":
        """Segment, mesh, and deform; stores the fitted groups.

        ``prediction`` is a DepthMap or 2-D array (0 = missing), ``samples``
        a SparseSamples or (n, 3) array of (u, v, depth), ``labels`` a
        LabelMap or integer array (required for smd mode).
        """
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode '{self.mode}', expected one of {MODES}")
        prediction = as_depth_map(prediction, "prediction")
        samples = as_samples(samples, "samples")
        self.prediction_ = prediction
        self.samples_ = samples
        self.groups_ = []
        self.group_stats_ = []
        self.warnings_ = {}
        self.residual_pixel_count_ = int(prediction.validity.sum())

        if self.mode == "none":
            return self

        intr = as_intrinsics(self.intrinsics)
        config = self._arap_config()

        if self.mode == "smd":
            if labels is None:
                raise ConfigError("smd mode requires a label map")
            labels = as_label_map(labels)
            if labels.shape != prediction.shape:
                raise InputError(
                    f"label map shape {labels.shape} does not match prediction {prediction.shape}"
                )
            seg = meshing.segment_groups(prediction, labels, samples)
            candidates = seg.groups
            for key, val in seg.notes.items():
                if val:
                    self.warnings_[key] = self.warnings_.get(key, 0) + val
        else:
            samples.check_bounds(prediction.width, prediction.height)
            candidates = [None]  # single global mesh

        covered = 0
        for cand in candidates:
            if cand is None:
                connectivity, stride = self._group_stride(int(prediction.validity.sum()))
                built, _ = meshing.build_global_mesh(
                    prediction, samples, intr, connectivity=connectivity, stride=stride
                )
            else:
                connectivity, stride = self._group_stride(cand.n_pixels)
                built, _ = meshing.build_group_mesh(
                    cand, prediction, intr, connectivity=connectivity, stride=stride
                )
            if built is None:
                continue
            result = deform(built.mesh, built.anchors, config)
            fitted = replace(built, deformation=result)
            self.groups_.append(fitted)
            covered += fitted.n_pixels
            for key, val in fitted.warnings.items():
                self.warnings_[key] = self.warnings_.get(key, 0) + val
            for key, val in result.warnings.items():
                self.warnings_[key] = self.warnings_.get(key, 0) + val
            self.group_stats_.append(
                {
                    "label": fitted.label,
                    "vertices": fitted.mesh.n_vertices,
                    "triangles": fitted.mesh.n_triangles,
                    "anchors": len(fitted.anchors),
                    "iterations": result.iterations,
                    "final_energy": result.final_energy,
                    "converged": result.converged,
                }
            )
        self.residual_pixel_count_ = int(prediction.validity.sum()) - covered
        return self

    def transform(self, prediction=None) -> DepthMap:
        """Regenerate the calibrated depth map from the fitted deformations.

        With no argument the fitted prediction is used; an explicit map must
        have the same shape (deformed depths are written over it).
        """
        if not hasattr(self, "prediction_"):
            raise InputError("calibrator is not fitted; call fit() first")
        base = self.prediction_ if prediction is None else as_depth_map(prediction, "prediction")
        if base.shape != self.prediction_.shape:
            raise InputError(
                f"prediction shape {base.shape} does not match fitted {self.prediction_.shape}"
            )
        if self.mode == "none":
            return base
        intr = as_intrinsics(self.intrinsics)
        return regenerate(self.groups_, base, intr, RegenConfig(mode=self.regen_mode))

    def fit_transform(self, prediction, samples, labels=None) -> DepthMap:
        return self.fit(prediction, samples, labels=labels).transform()
