"""As-rigid-as-possible mesh deformation toward anchor targets.

Minimizes the energy

    E = sum_i sum_{j in N(i)} w_ij || (p'_i - p'_j) - R_i (p_i - p_j) ||^2

over deformed positions p' and per-vertex rotations R_i, where w_ij are
cotangent weights of the rest mesh. The solve alternates two steps until the
energy stalls:

* local step: with positions fixed, each R_i is the rotation best aligning
  the vertex's rest edge fan to its current fan (polar factor of the weighted
  covariance, determinant forced to +1);
* global step: with rotations fixed, positions solve the sparse normal
  equations L p' = b, where L is the cotangent Laplacian.

Anchors are enforced either exactly (hard mode: their rows are eliminated
from the system) or by a quadratic penalty (soft mode). Each alternation
step is a coordinate descent on the objective, so the energy trace is
non-increasing up to round-off.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse import coo_matrix, csc_matrix, diags
from scipy.sparse.csgraph import connected_components
from scipy.sparse.linalg import minres, splu

from .core import _freeze
from .errors import DegenerateTriangleError, InputError, SingularSystemError
from .meshing import AnchorSet, TriangleMesh

__all__ = [
    "ArapConfig",
    "CotangentWeights",
    "DeformationResult",
    "arap_energy",
    "cotangent_weights",
    "deform",
    "global_step",
    "local_step",
]


@dataclass(frozen=True)
class ArapConfig:
    """Solver settings.

    ``rel_energy_tol`` compares successive energies: the loop stops once
    (E_prev - E_curr) / max(E_prev, tiny) drops below it. ``weight_clamp_floor``
    is None to keep the faithful Laplacian (negative cotangents from obtuse
    triangles survive); set it to 0.0 to clamp them away on pathological
    meshes.
    """

    max_iterations: int = 100
    rel_energy_tol: float = 1e-6
    constraint_mode: str = "hard"
    soft_weight: float = 1e4
    weight_clamp_floor: float | None = None

    def __post_init__(self):
        if self.constraint_mode not in ("hard", "soft"):
            raise InputError(f"unknown constraint mode '{self.constraint_mode}'")
        if self.rel_energy_tol <= 0:
            raise InputError("rel_energy_tol must be > 0")
        if self.max_iterations < 1:
            raise InputError("max_iterations must be >= 1")
        if self.constraint_mode == "soft" and self.soft_weight <= 0:
            raise InputError("soft_weight must be > 0 in soft mode")


@dataclass(frozen=True)
class CotangentWeights:
    """Symmetric per-edge weights aligned with ``edges`` (each row i < j)."""

    edges: np.ndarray    # (e, 2) int64
    weights: np.ndarray  # (e,) float64
    n_vertices: int

    def __post_init__(self):
        edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        weights = np.asarray(self.weights, dtype=np.float64).ravel()
        if edges.shape[0] != weights.size:
            raise InputError("edges and weights must have equal lengths")
        object.__setattr__(self, "edges", _freeze(edges))
        object.__setattr__(self, "weights", _freeze(weights))


@dataclass(frozen=True)
class DeformationResult:
    positions: np.ndarray      # (n, 3) deformed vertex positions
    energy_trace: np.ndarray   # energy after each global step
    iterations: int
    converged: bool
    warnings: dict

    @property
    def final_energy(self) -> float:
        return float(self.energy_trace[-1]) if self.energy_trace.size else 0.0


def cotangent_weights(mesh: TriangleMesh, clamp_floor: float | None = None) -> CotangentWeights:
    """Per-edge w = 1/2 * sum over incident triangles of cot(opposite angle),
    from rest-pose 3D positions. Boundary edges see a single cotangent."""
    if mesh.n_triangles < 1:
        raise InputError("mesh has no triangles")
    v = mesh.vertices
    t = mesh.triangles
    edges = mesh.edges
    n = mesh.n_vertices
    # row lookup: edge (i, j) with i < j -> position in `edges`
    edge_key = edges[:, 0] * n + edges[:, 1]
    acc = np.zeros(edges.shape[0])

    for corner in range(3):
        a = t[:, corner]
        b = t[:, (corner + 1) % 3]
        c = t[:, (corner + 2) % 3]
        e1 = v[b] - v[a]
        e2 = v[c] - v[a]
        cross = np.cross(e1, e2)
        area2 = np.linalg.norm(cross, axis=1)
        if np.any(area2 == 0):
            bad = int(np.argmax(area2 == 0))
            raise DegenerateTriangleError(
                f"triangle {bad} {t[bad].tolist()} has zero area"
            )
        cot = np.einsum("ij,ij->i", e1, e2) / area2
        lo = np.minimum(b, c)
        hi = np.maximum(b, c)
        rows = np.searchsorted(edge_key, lo * n + hi)
        np.add.at(acc, rows, cot)

    w = 0.5 * acc
    if clamp_floor is not None:
        w = np.maximum(w, clamp_floor)
    return CotangentWeights(edges=edges, weights=w, n_vertices=n)


def _directed(weights: CotangentWeights):
    """Directed edge arrays (src, dst, w): each undirected edge both ways."""
    e = weights.edges
    src = np.concatenate([e[:, 0], e[:, 1]])
    dst = np.concatenate([e[:, 1], e[:, 0]])
    w = np.concatenate([weights.weights, weights.weights])
    return src, dst, w


def _bincount_rows(index: np.ndarray, contrib: np.ndarray, n: int) -> np.ndarray:
    """Sum rows of ``contrib`` into ``n`` bins; works for any trailing shape."""
    flat = contrib.reshape(contrib.shape[0], -1)
    out = np.empty((n, flat.shape[1]))
    for col in range(flat.shape[1]):
        out[:, col] = np.bincount(index, weights=flat[:, col], minlength=n)
    return out.reshape((n,) + contrib.shape[1:])


def local_step(rest: np.ndarray, current: np.ndarray, weights: CotangentWeights):
    """Best-fit rotation per vertex.

    R_i maximizes alignment of the rest edge fan with the current one:
    the SVD polar factor of S_i = sum_j w_ij (p_i - p_j)(p'_i - p'_j)^T,
    with the smallest singular direction flipped when needed so that
    det(R_i) = +1 (proper rotation, never a reflection).

    Returns ``(rotations, isolated_count)``; vertices with no incident edge
    get the identity.
    """
    rest = np.asarray(rest, dtype=np.float64)
    current = np.asarray(current, dtype=np.float64)
    if not (np.all(np.isfinite(rest)) and np.all(np.isfinite(current))):
        raise InputError("positions must be finite")
    n = weights.n_vertices
    src, dst, w = _directed(weights)
    d_rest = rest[src] - rest[dst]
    d_cur = current[src] - current[dst]
    outer = w[:, None, None] * (d_rest[:, :, None] * d_cur[:, None, :])
    s = _bincount_rows(src, outer, n)

    u, _, vt = np.linalg.svd(s)
    r = np.matmul(vt.transpose(0, 2, 1), u.transpose(0, 2, 1))
    flip = np.linalg.det(r) < 0
    if np.any(flip):
        vt_f = vt[flip].copy()
        vt_f[:, 2, :] *= -1.0
        r[flip] = np.matmul(vt_f.transpose(0, 2, 1), u[flip].transpose(0, 2, 1))

    degree = np.bincount(src, minlength=n)
    isolated = int((degree == 0).sum())
    if isolated:
        r[degree == 0] = np.eye(3)
    return r, isolated


def _laplacian(weights: CotangentWeights) -> csc_matrix:
    src, dst, w = _directed(weights)
    n = weights.n_vertices
    diag = np.bincount(src, weights=w, minlength=n)
    rows = np.concatenate([src, np.arange(n)])
    cols = np.concatenate([dst, np.arange(n)])
    vals = np.concatenate([-w, diag])
    return coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsc()


def _rotation_rhs(rest: np.ndarray, rotations: np.ndarray, weights: CotangentWeights) -> np.ndarray:
    """b_i = sum_j (w_ij / 2) (R_i + R_j)(p_i - p_j)."""
    src, dst, w = _directed(weights)
    e = rest[src] - rest[dst]
    rsum = rotations[src] + rotations[dst]
    contrib = 0.5 * w[:, None] * np.einsum("eab,eb->ea", rsum, e)
    return _bincount_rows(src, contrib, weights.n_vertices)


def _check_anchored_components(weights: CotangentWeights, anchor_idx: np.ndarray) -> None:
    """Every effectively-connected component (via nonzero-weight edges) must
    hold an anchor, or the deformation system is singular."""
    nz = weights.weights != 0
    e = weights.edges[nz]
    n = weights.n_vertices
    adj = coo_matrix((np.ones(e.shape[0]), (e[:, 0], e[:, 1])), shape=(n, n))
    n_comp, comp = connected_components(adj, directed=False)
    anchored = np.zeros(n_comp, dtype=bool)
    anchored[comp[anchor_idx]] = True
    if not anchored.all():
        missing = int(np.argmin(anchored))
        size = int((comp == missing).sum())
        raise SingularSystemError(
            f"component {missing} ({size} vertices) has no anchor and no unique solution"
        )


class _LinearSolver:
    """Factorize once, reuse across iterations. A factorization that fails or
    returns an inaccurate solution (possible when obtuse triangles make the
    system indefinite and near-singular) falls back to MINRES; if that cannot
    solve it either, the system is reported singular."""

    RESIDUAL_TOL = 1e-8

    def __init__(self, matrix: csc_matrix, what: str):
        self.matrix = matrix
        self.what = what
        try:
            self._lu = splu(matrix.tocsc())
        except RuntimeError:
            self._lu = None

    def _accurate(self, x: np.ndarray, rhs: np.ndarray) -> bool:
        residual = np.linalg.norm(self.matrix @ x - rhs)
        return bool(np.isfinite(residual) and residual <= self.RESIDUAL_TOL * (1.0 + np.linalg.norm(rhs)))

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        if self._lu is not None:
            x = self._lu.solve(rhs)
            if self._accurate(x, rhs):
                return x
        out = np.empty_like(rhs)
        for col in range(rhs.shape[1]):
            x, info = minres(self.matrix, rhs[:, col], rtol=1e-12, maxiter=10 * self.matrix.shape[0])
            if info != 0:
                raise SingularSystemError(f"{self.what}: iterative solve failed (info={info})")
            out[:, col] = x
        if not self._accurate(out, rhs):
            raise SingularSystemError(f"{self.what}: system is singular or too ill-conditioned")
        return out


def global_step(
    rest: np.ndarray,
    rotations: np.ndarray,
    weights: CotangentWeights,
    anchors: AnchorSet,
    config: ArapConfig,
) -> np.ndarray:
    """Positions minimizing the energy for fixed rotations (single solve,
    no factorization reuse — ``deform`` keeps the factorization across
    iterations)."""
    lap = _laplacian(weights)
    b = _rotation_rhs(rest, rotations, weights)
    a_idx = np.asarray(anchors.vertex_indices)
    _check_anchored_components(weights, a_idx)
    if config.constraint_mode == "hard":
        free = np.ones(weights.n_vertices, dtype=bool)
        free[a_idx] = False
        free_idx = np.nonzero(free)[0]
        solver = _LinearSolver(lap[np.ix_(free_idx, free_idx)].tocsc(), "global step")
        coupling = lap[np.ix_(free_idx, a_idx)]  # columns in anchor order
        out = np.empty_like(rest)
        out[a_idx] = anchors.targets
        out[free] = solver.solve(b[free] - coupling @ anchors.targets)
        return out
    lam = config.soft_weight
    a = (lap + lam * _anchor_diag(weights.n_vertices, a_idx)).tocsc()
    b = b.copy()
    b[a_idx] += lam * anchors.targets
    return _LinearSolver(a, "global step").solve(b)


def _anchor_diag(n: int, idx: np.ndarray) -> csc_matrix:
    d = np.zeros(n)
    d[idx] = 1.0
    return diags(d, format="csc")


def arap_energy(
    rest: np.ndarray, positions: np.ndarray, rotations: np.ndarray, weights: CotangentWeights
) -> float:
    """The deformation energy for given positions and rotations."""
    src, dst, w = _directed(weights)
    d_rest = rest[src] - rest[dst]
    d_cur = positions[src] - positions[dst]
    residual = d_cur - np.einsum("eab,eb->ea", rotations[src], d_rest)
    return float((w * np.einsum("ij,ij->i", residual, residual)).sum())


def deform(mesh: TriangleMesh, anchors: AnchorSet, config: ArapConfig | None = None) -> DeformationResult:
    """Alternate global and local steps until the energy stalls.

    Starts from the rest pose with anchor vertices snapped to their targets;
    the first global solve uses identity rotations, which already resolves
    pure translations exactly. The recorded trace is the minimized objective:
    the deformation energy in hard mode, plus the anchor penalty in soft mode.
    """
    config = config or ArapConfig()
    if len(anchors) == 0:
        raise InputError("deformation needs at least one anchor")
    weights = cotangent_weights(mesh, config.weight_clamp_floor)
    a_idx = np.asarray(anchors.vertex_indices)
    _check_anchored_components(weights, a_idx)

    rest = mesh.vertices
    lap = _laplacian(weights)
    hard = config.constraint_mode == "hard"
    if hard:
        free = np.ones(weights.n_vertices, dtype=bool)
        free[a_idx] = False
        free_idx = np.nonzero(free)[0]
        solver = _LinearSolver(lap[np.ix_(free_idx, free_idx)].tocsc(), "group deformation")
        coupling = lap[np.ix_(free_idx, a_idx)]  # columns in anchor order
    else:
        lam = config.soft_weight
        solver = _LinearSolver(
            (lap + lam * _anchor_diag(weights.n_vertices, a_idx)).tocsc(), "group deformation"
        )

    # starting state: rest pose with anchor vertices substituted by targets;
    # the first global solve (identity rotations) then relaxes it
    positions = rest.copy()
    positions[a_idx] = anchors.targets
    rotations = np.broadcast_to(np.eye(3), (weights.n_vertices, 3, 3)).copy()

    def objective(pos, rot):
        e = arap_energy(rest, pos, rot, weights)
        if not hard:
            d = pos[a_idx] - anchors.targets
            e += config.soft_weight * float((d * d).sum())
        return e

    trace: list[float] = []
    isolated_total = 0
    converged = False
    iterations = 0
    for iterations in range(1, config.max_iterations + 1):
        b = _rotation_rhs(rest, rotations, weights)
        if hard:
            positions = positions.copy()
            positions[a_idx] = anchors.targets
            positions[free] = solver.solve(b[free] - coupling @ anchors.targets)
        else:
            rhs = b.copy()
            rhs[a_idx] += config.soft_weight * anchors.targets
            positions = solver.solve(rhs)
        rotations, isolated = local_step(rest, positions, weights)
        isolated_total = max(isolated_total, isolated)
        trace.append(objective(positions, rotations))
        if len(trace) >= 2:
            prev, curr = trace[-2], trace[-1]
            if (prev - curr) <= config.rel_energy_tol * max(prev, 1e-30):
                converged = True
                break

    warnings = {"isolated_vertices": isolated_total} if isolated_total else {}
    return DeformationResult(
        positions=positions,
        energy_trace=np.asarray(trace),
        iterations=iterations,
        converged=converged,
        warnings=warnings,
    )
