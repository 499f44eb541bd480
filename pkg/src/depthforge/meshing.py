"""Per-object mesh construction from a predicted depth map.

The predicted depth map is split into object groups by the label map, each
group's valid pixels are lifted to 3D and connected into a triangle mesh,
and the sparse samples inside the group become anchors: mesh vertices paired
with the 3D position the sample says they should occupy.

Groups that cannot be deformed are routed to the residual set and pass
through the pipeline unchanged: labels with no samples, labels with fewer
than three valid pixels, connected components containing no anchor, and
vertices that end up in no triangle.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .core import CameraIntrinsics, DepthMap, LabelMap, SparseSamples, _freeze, unproject_grid
from .errors import DegenerateInputError, InputError, TooFewVerticesError

__all__ = [
    "AnchorSet",
    "SegmentationResult",
    "SemanticObjectGroup",
    "TriangleMesh",
    "build_global_mesh",
    "build_group_mesh",
    "segment_groups",
    "triangulate_delaunay",
    "triangulate_grid",
    "write_obj",
]

GLOBAL_GROUP_LABEL = 0  # label id reported for the whole-image (GMD) mesh


@dataclass(frozen=True)
class TriangleMesh:
    """Indexed triangle mesh; vertices remember their source pixel.

    ``edges`` holds each undirected edge exactly once (i < j). Meshes need
    not be manifold: depth-map grids with holes are expected.
    """

    vertices: np.ndarray   # (n, 3) float64 camera-frame positions
    pixels: np.ndarray     # (n, 2) int64 originating (u, v)
    triangles: np.ndarray  # (t, 3) int64 vertex indices

    def __post_init__(self):
        vertices = np.asarray(self.vertices, dtype=np.float64).reshape(-1, 3)
        pixels = np.asarray(self.pixels, dtype=np.int64).reshape(-1, 2)
        triangles = np.asarray(self.triangles, dtype=np.int64).reshape(-1, 3)
        n = vertices.shape[0]
        if pixels.shape[0] != n:
            raise InputError("vertices and pixels must have equal lengths")
        if triangles.size:
            if triangles.min() < 0 or triangles.max() >= n:
                raise InputError("triangle index out of range")
            if np.any(
                (triangles[:, 0] == triangles[:, 1])
                | (triangles[:, 1] == triangles[:, 2])
                | (triangles[:, 0] == triangles[:, 2])
            ):
                raise InputError("degenerate triangle with repeated vertex index")
        object.__setattr__(self, "vertices", _freeze(vertices))
        object.__setattr__(self, "pixels", _freeze(pixels))
        object.__setattr__(self, "triangles", _freeze(triangles))
        object.__setattr__(self, "_edges", None)

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_triangles(self) -> int:
        return self.triangles.shape[0]

    @property
    def edges(self) -> np.ndarray:
        """Unique undirected edges, shape (e, 2), each row sorted, lexicographic order."""
        cached = object.__getattribute__(self, "_edges")
        if cached is None:
            t = self.triangles
            if t.size == 0:
                cached = np.empty((0, 2), np.int64)
            else:
                pairs = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
                pairs = np.sort(pairs, axis=1)
                cached = np.unique(pairs, axis=0)
            cached = _freeze(cached)
            object.__setattr__(self, "_edges", cached)
        return cached


@dataclass(frozen=True)
class AnchorSet:
    """Sparse constraints: mesh vertex indices and their 3D target positions.

    Anchors built from sparse samples always have target z > 0 (they are
    unprojected from positive depths); the type itself allows arbitrary
    targets so the deformation solver stays usable for free-space geometry,
    and regeneration rejects behind-camera results where it matters.
    """

    vertex_indices: np.ndarray  # (k,) int64, distinct
    targets: np.ndarray         # (k, 3) float64

    def __post_init__(self):
        idx = np.asarray(self.vertex_indices, dtype=np.int64).ravel()
        targets = np.asarray(self.targets, dtype=np.float64).reshape(-1, 3)
        if idx.size != targets.shape[0]:
            raise InputError("anchor indices and targets must have equal lengths")
        if idx.size and np.unique(idx).size != idx.size:
            raise InputError("anchor vertex indices must be distinct")
        if targets.size and not np.all(np.isfinite(targets)):
            raise InputError("anchor targets must be finite")
        object.__setattr__(self, "vertex_indices", _freeze(idx))
        object.__setattr__(self, "targets", _freeze(targets))

    def __len__(self) -> int:
        return self.vertex_indices.size


@dataclass(frozen=True)
class SemanticObjectGroup:
    """One object's pixels plus, once built, its mesh and anchors.

    ``segment_groups`` produces groups with ``mesh is None``;
    ``build_group_mesh`` completes them. The pipeline later attaches the
    deformation result via ``dataclasses.replace``.
    """

    label: int
    pixels: np.ndarray              # (m, 2) int64 (u, v), row-major order
    samples: SparseSamples
    mesh: TriangleMesh | None = None
    anchors: AnchorSet | None = None
    deformation: object | None = None
    warnings: dict = field(default_factory=dict)

    @property
    def n_pixels(self) -> int:
        return self.pixels.shape[0]


@dataclass(frozen=True)
class SegmentationResult:
    groups: list
    residual_pixels: np.ndarray     # (m, 2) valid pixels belonging to no group
    residual_samples: SparseSamples
    notes: dict


def _pixels_of_mask(mask: np.ndarray) -> np.ndarray:
    vs, us = np.nonzero(mask)
    return np.column_stack([us, vs]).astype(np.int64)


def segment_groups(
    prediction: DepthMap, labels: LabelMap, samples: SparseSamples
) -> SegmentationResult:
    """Partition valid pixels into per-label groups and a residual set.

    A label becomes a group iff at least one sample falls inside its mask and
    it covers at least three valid pixels (the minimum for a triangle).
    Unlabeled pixels (id 0), sample-free labels, and too-small labels land in
    the residual. Every sample is assigned to exactly one group or to the
    residual; every valid pixel to exactly one side as well.
    """
    if labels.shape != prediction.shape:
        raise InputError(
            f"label map shape {labels.shape} does not match prediction {prediction.shape}"
        )
    samples.check_bounds(prediction.width, prediction.height)

    sample_labels = labels.labels[samples.v, samples.u] if len(samples) else np.empty(0, np.int32)
    groups: list[SemanticObjectGroup] = []
    residual_masks = [prediction.validity & (labels.labels == 0)]
    residual_sample_mask = sample_labels == 0
    notes = {"labels_without_samples": 0, "labels_too_small": 0}

    for obj_id in labels.ids():
        in_label = sample_labels == obj_id
        mask = prediction.validity & (labels.labels == obj_id)
        if not in_label.any():
            notes["labels_without_samples"] += 1
            residual_masks.append(mask)
            continue
        if mask.sum() < 3:
            notes["labels_too_small"] += 1
            residual_masks.append(mask)
            residual_sample_mask |= in_label
            continue
        groups.append(
            SemanticObjectGroup(
                label=int(obj_id), pixels=_pixels_of_mask(mask), samples=samples.subset(in_label)
            )
        )

    residual = np.zeros(prediction.shape, dtype=bool)
    for m in residual_masks:
        residual |= m
    return SegmentationResult(
        groups=groups,
        residual_pixels=_pixels_of_mask(residual),
        residual_samples=samples.subset(residual_sample_mask),
        notes=notes,
    )


def triangulate_grid(pixels) -> np.ndarray:
    """Triangulate a set of grid pixels: every fully-present 2x2 quad emits
    two triangles split along its top-left -> bottom-right diagonal; quads
    with exactly three present corners emit that single triangle.

    On a regular grid this connectivity is Delaunay up to cocircular ties,
    and the fixed diagonal makes it deterministic. Returns (t, 3) indices
    into the input pixel order.
    """
    px = np.asarray(pixels, dtype=np.int64).reshape(-1, 2)
    if px.shape[0] < 3:
        raise TooFewVerticesError(f"need at least 3 pixels, got {px.shape[0]}")
    u0, v0 = px[:, 0].min(), px[:, 1].min()
    w = px[:, 0].max() - u0 + 1
    h = px[:, 1].max() - v0 + 1
    grid = np.full((h + 1, w + 1), -1, dtype=np.int64)  # 1-pixel pad on the high side
    if grid[px[:, 1] - v0, px[:, 0] - u0].max(initial=-1) != -1:
        raise InputError("duplicate pixels in group")
    grid[px[:, 1] - v0, px[:, 0] - u0] = np.arange(px.shape[0])

    tl = grid[:-1, :-1]
    tr = grid[:-1, 1:]
    bl = grid[1:, :-1]
    br = grid[1:, 1:]
    present = np.stack([tl >= 0, tr >= 0, bl >= 0, br >= 0])
    count = present.sum(axis=0)

    tris = []
    full = count == 4
    if full.any():
        tris.append(np.column_stack([tl[full], bl[full], br[full]]))
        tris.append(np.column_stack([tl[full], br[full], tr[full]]))
    three = count == 3
    if three.any():
        corners = np.stack([tl[three], tr[three], bl[three], br[three]], axis=1)
        rows = np.sort(corners, axis=1)[:, 1:]  # drop the single -1 per quad
        tris.append(rows)
    if not tris:
        return np.empty((0, 3), np.int64)
    return np.concatenate(tris)


def _circumcircle(a, b, c):
    """Center and squared radius of the circle through three points."""
    d = 2.0 * (a[0] * (b[1] - c[1]) + b[0] * (c[1] - a[1]) + c[0] * (a[1] - b[1]))
    if d == 0:
        return None
    a2 = a[0] * a[0] + a[1] * a[1]
    b2 = b[0] * b[0] + b[1] * b[1]
    c2 = c[0] * c[0] + c[1] * c[1]
    ux = (a2 * (b[1] - c[1]) + b2 * (c[1] - a[1]) + c2 * (a[1] - b[1])) / d
    uy = (a2 * (c[0] - b[0]) + b2 * (a[0] - c[0]) + c2 * (b[0] - a[0])) / d
    r2 = (a[0] - ux) ** 2 + (a[1] - uy) ** 2
    return (ux, uy), r2


def triangulate_delaunay(points) -> np.ndarray:
    """Delaunay triangulation by incremental insertion (Bowyer-Watson).

    Every returned triangle satisfies the empty-circumcircle property over
    the input set, with ties on the circle allowed. Raises for fewer than
    three points, duplicates, or an all-collinear set.
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    n = pts.shape[0]
    if n < 3:
        raise TooFewVerticesError(f"need at least 3 points, got {n}")
    if np.unique(pts, axis=0).shape[0] != n:
        raise DegenerateInputError("duplicate points")
    span = pts.max(axis=0) - pts.min(axis=0)
    scale = max(span.max(), 1.0)
    d0 = pts - pts[0]
    cross = d0[:, 0] * (pts[1, 1] - pts[0, 1]) - d0[:, 1] * (pts[1, 0] - pts[0, 0])
    if np.all(np.abs(cross) <= 1e-12 * scale * scale):
        raise DegenerateInputError("all points are collinear")

    center = pts.mean(axis=0)
    radius = 64.0 * scale + 1.0
    super_idx = [n, n + 1, n + 2]
    all_pts = np.vstack(
        [
            pts,
            center + radius * np.array([0.0, 2.0]),
            center + radius * np.array([-1.7320508075688772, -1.0]),
            center + radius * np.array([1.7320508075688772, -1.0]),
        ]
    )
    # triangle store: list of (i, j, k, center, r2); None marks removed entries
    tris: list = []

    def add_triangle(i, j, k):
        cc = _circumcircle(all_pts[i], all_pts[j], all_pts[k])
        if cc is None:
            return  # collinear sliver contributes no area and no circumcircle
        tris.append((i, j, k, cc[0], cc[1]))

    add_triangle(*super_idx)
    eps = 1e-12 * scale * scale
    for p in range(n):
        x, y = all_pts[p]
        bad = []
        for t_idx, tri in enumerate(tris):
            if tri is None:
                continue
            (cx, cy), r2 = tri[3], tri[4]
            if (x - cx) ** 2 + (y - cy) ** 2 < r2 - eps:
                bad.append(t_idx)
        boundary: dict[tuple[int, int], int] = {}
        for t_idx in bad:
            i, j, k = tris[t_idx][:3]
            for e in ((i, j), (j, k), (k, i)):
                key = (min(e), max(e))
                boundary[key] = boundary.get(key, 0) + 1
            tris[t_idx] = None
        for (i, j), cnt in boundary.items():
            if cnt == 1:
                add_triangle(i, j, p)

    out = [
        (i, j, k)
        for tri in tris
        if tri is not None
        for i, j, k in [tri[:3]]
        if i < n and j < n and k < n
    ]
    if not out:
        raise DegenerateInputError("triangulation produced no triangles")
    return np.asarray(out, dtype=np.int64)


def _stride_keep_mask(px: np.ndarray, samples: SparseSamples, stride: int) -> np.ndarray:
    keep = (px[:, 0] % stride == 0) & (px[:, 1] % stride == 0)
    if len(samples):
        sample_set = set(zip(samples.u.tolist(), samples.v.tolist()))
        for i, (u, v) in enumerate(zip(px[:, 0].tolist(), px[:, 1].tolist())):
            if (u, v) in sample_set:
                keep[i] = True
    return keep


def build_group_mesh(
    group: SemanticObjectGroup,
    prediction: DepthMap,
    intrinsics: CameraIntrinsics,
    connectivity: str = "grid",
    stride: int = 1,
):
    """Complete a segmented group: lift its pixels to 3D, triangulate, and
    bind anchors.

    Anchor-free connected components and triangle-less vertices cannot be
    deformed, so their pixels are demoted. Samples whose pixel carries no
    valid prediction are dropped (counted in the group's warnings). Returns
    ``(completed_group_or_None, demoted_pixels)``; ``None`` means the whole
    group was demoted.
    """
    if stride < 1:
        raise InputError(f"stride must be >= 1, got {stride}")
    if connectivity not in ("grid", "delaunay"):
        raise InputError(f"unknown connectivity '{connectivity}'")
    if stride > 1 and connectivity == "grid":
        raise InputError("grid connectivity requires stride 1; use delaunay for subsampled meshes")

    px = group.pixels
    warnings = dict(group.warnings)

    if stride > 1:
        px = px[_stride_keep_mask(px, group.samples, stride)]
    if px.shape[0] < 3:
        return None, group.pixels

    try:
        if connectivity == "grid":
            triangles = triangulate_grid(px)
        else:
            triangles = triangulate_delaunay(px.astype(np.float64))
    except DegenerateInputError:
        return None, group.pixels
    if triangles.shape[0] == 0:
        return None, group.pixels

    # map each sample to its vertex; samples off the vertex set are dropped
    key = px[:, 0] * prediction.height + px[:, 1]
    order = np.argsort(key, kind="stable")
    anchor_vertex = np.full(len(group.samples), -1, dtype=np.int64)
    if len(group.samples):
        samples_key = group.samples.u * prediction.height + group.samples.v
        pos = np.searchsorted(key[order], samples_key)
        pos = np.clip(pos, 0, px.shape[0] - 1)
        hit = key[order][pos] == samples_key
        anchor_vertex[hit] = order[pos[hit]]
    dropped_samples = int((anchor_vertex < 0).sum())
    if dropped_samples:
        warnings["samples_on_invalid_pixels"] = warnings.get("samples_on_invalid_pixels", 0) + dropped_samples

    # keep only connected components that contain at least one anchor
    n = px.shape[0]
    e = np.concatenate([triangles[:, [0, 1]], triangles[:, [1, 2]], triangles[:, [2, 0]]])
    adj = coo_matrix((np.ones(e.shape[0]), (e[:, 0], e[:, 1])), shape=(n, n))
    n_comp, comp = connected_components(adj, directed=False)
    in_triangle = np.zeros(n, dtype=bool)
    in_triangle[np.unique(triangles)] = True
    anchored_comps = np.unique(comp[anchor_vertex[anchor_vertex >= 0]])
    keep_vertex = in_triangle & np.isin(comp, anchored_comps)
    if not keep_vertex.any():
        return None, group.pixels

    demoted = px[~keep_vertex]
    dropped_comps = n_comp - anchored_comps.size
    if dropped_comps or demoted.size:
        warnings["anchor_free_components"] = warnings.get("anchor_free_components", 0) + int(dropped_comps)

    new_index = np.cumsum(keep_vertex) - 1
    kept_px = px[keep_vertex]
    tri_keep = keep_vertex[triangles].all(axis=1)
    new_tris = new_index[triangles[tri_keep]]

    vertices = unproject_grid(
        kept_px[:, 0], kept_px[:, 1], prediction.values[kept_px[:, 1], kept_px[:, 0]], intrinsics
    )
    mesh = TriangleMesh(vertices=vertices, pixels=kept_px, triangles=new_tris)

    # anchors on demoted vertices (e.g. isolated, triangle-less ones) go too
    sample_ok = anchor_vertex >= 0
    sample_ok[sample_ok] &= keep_vertex[anchor_vertex[sample_ok]]
    if not sample_ok.any():
        return None, group.pixels
    anchor_idx = new_index[anchor_vertex[sample_ok]]
    kept_samples = group.samples.subset(sample_ok)
    targets = unproject_grid(kept_samples.u, kept_samples.v, kept_samples.depth, intrinsics)
    anchors = AnchorSet(anchor_idx, targets)

    completed = replace(group, pixels=kept_px, samples=kept_samples, mesh=mesh,
                        anchors=anchors, warnings=warnings)
    return completed, demoted


def build_global_mesh(
    prediction: DepthMap,
    samples: SparseSamples,
    intrinsics: CameraIntrinsics,
    connectivity: str = "grid",
    stride: int = 1,
):
    """Single whole-image mesh over all valid pixels, labels ignored.

    Same contract as ``build_group_mesh``; with a label map that assigns one
    label to the entire image the result is structurally identical to that
    label's group.
    """
    samples.check_bounds(prediction.width, prediction.height)
    valid_at = prediction.validity[samples.v, samples.u] if len(samples) else np.empty(0, bool)
    group = SemanticObjectGroup(
        label=GLOBAL_GROUP_LABEL,
        pixels=_pixels_of_mask(prediction.validity),
        samples=samples.subset(valid_at) if len(samples) else samples,
    )
    dropped = int((~valid_at).sum()) if len(samples) else 0
    if dropped:
        group = replace(group, warnings={"samples_on_invalid_pixels": dropped})
    return build_group_mesh(group, prediction, intrinsics, connectivity=connectivity, stride=stride)


def write_obj(mesh: TriangleMesh, path, positions: np.ndarray | None = None) -> None:
    """Dump a mesh as Wavefront OBJ (camera-frame meters, 1-based indices).

    ``positions`` overrides vertex positions, e.g. to export a deformed mesh
    on the original connectivity.
    """
    v = mesh.vertices if positions is None else np.asarray(positions).reshape(-1, 3)
    if v.shape[0] != mesh.n_vertices:
        raise InputError("positions length does not match mesh")
    with open(path, "w") as f:
        f.write("# depthforge mesh dump\n")
        for x, y, z in v:
            f.write(f"v {x:.9g} {y:.9g} {z:.9g}\n")
        for i, j, k in mesh.triangles:
            f.write(f"f {i + 1} {j + 1} {k + 1}\n")
