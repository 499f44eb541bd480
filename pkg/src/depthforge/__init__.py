"""depthforge: calibrate predicted depth maps against sparse depth samples.

The package reconstructs a triangle mesh per labeled object from a predicted
depth map, deforms each mesh as-rigidly-as-possible so the vertices at
sampled pixels reach the 3D positions the trusted samples dictate, and
regenerates a dense calibrated depth map. It also provides the semantic
edge-weighted loss for external trainers and the standard depth evaluation
metrics.

Typical use::

    from depthforge import DepthCalibrator

    cal = DepthCalibrator(intrinsics=(fx, fy, cx, cy), mode="smd")
    calibrated = cal.fit_transform(prediction, samples, labels=labels)
"""

__version__ = "0.1.0"

from .arap import ArapConfig, CotangentWeights, DeformationResult, cotangent_weights, deform
from .calibrator import DepthCalibrator
from .core import (
    CameraIntrinsics,
    DepthMap,
    LabelMap,
    PointCloud,
    SparseSamples,
    project,
    unproject,
)
from .edgeloss import (
    CannyParams,
    EdgeMap,
    LossReport,
    canny,
    edge_weighted_loss,
    l1_loss,
    label_discontinuity,
    semantic_edges,
)
from .errors import DepthForgeError, InputError, NumericalError
from .meshing import (
    AnchorSet,
    SemanticObjectGroup,
    TriangleMesh,
    build_global_mesh,
    build_group_mesh,
    segment_groups,
    triangulate_delaunay,
    triangulate_grid,
)
from .metrics import ErrorCdf, MetricsReport, cdf, error_cdf, evaluate
from .regen import RegenConfig, rasterize_triangle, regenerate
from .sampler import Box, PerturbSpec, Plane, SynthScene, perturb, sample_uniform, synth_scene

__all__ = [
    "AnchorSet",
    "ArapConfig",
    "Box",
    "CameraIntrinsics",
    "CannyParams",
    "CotangentWeights",
    "DeformationResult",
    "DepthCalibrator",
    "DepthForgeError",
    "DepthMap",
    "EdgeMap",
    "ErrorCdf",
    "InputError",
    "LabelMap",
    "LossReport",
    "MetricsReport",
    "NumericalError",
    "PerturbSpec",
    "Plane",
    "PointCloud",
    "RegenConfig",
    "SemanticObjectGroup",
    "SparseSamples",
    "SynthScene",
    "TriangleMesh",
    "__version__",
    "build_global_mesh",
    "build_group_mesh",
    "canny",
    "cdf",
    "cotangent_weights",
    "deform",
    "edge_weighted_loss",
    "error_cdf",
    "evaluate",
    "l1_loss",
    "label_discontinuity",
    "perturb",
    "project",
    "rasterize_triangle",
    "regenerate",
    "sample_uniform",
    "segment_groups",
    "semantic_edges",
    "synth_scene",
    "triangulate_delaunay",
    "triangulate_grid",
    "unproject",
]
