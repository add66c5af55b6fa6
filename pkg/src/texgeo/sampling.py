"""Surface point sampling for the shape encoder's inputs.

Two clouds are drawn from a mesh: an area-uniform one and an importance one
concentrated on sharp feature edges. Point queries are then picked from each
cloud separately by farthest point sampling and concatenated.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import TargetExceedsInput, ZeroArea
from .mesh_core.mesh import TriMesh

log = logging.getLogger(__name__)

DEFAULT_DIHEDRAL_DEG = 30.0


@dataclass(frozen=True, eq=False)
class PointCloud:
    positions: np.ndarray
    normals: np.ndarray
    # set when importance sampling found no sharp edges and sampled uniformly
    used_fallback: bool = False

    def __post_init__(self):
        p = np.asarray(self.positions, dtype=np.float64).reshape(-1, 3)
        n = np.asarray(self.normals, dtype=np.float64).reshape(-1, 3)
        if len(p) != len(n):
            raise ValueError("positions and normals differ in length")
        object.__setattr__(self, "positions", p)
        object.__setattr__(self, "normals", n)

    def __len__(self):
        return len(self.positions)


@dataclass(frozen=True, eq=False)
class PointQuerySet:
    uniform_query: np.ndarray
    importance_query: np.ndarray
    uniform_index: np.ndarray = field(repr=False)
    importance_index: np.ndarray = field(repr=False)

    @property
    def combined(self) -> np.ndarray:
        return np.concatenate([self.uniform_query, self.importance_query], axis=0)


@dataclass(frozen=True)
class SharpEdgeSet:
    """Rows of ``edges`` are (vertex a, vertex b) with a < b; ``angles`` holds
    the dihedral angle in degrees (180 for boundary edges)."""

    edges: np.ndarray
    angles: np.ndarray
    boundary: np.ndarray
    threshold: float

    def __len__(self):
        return len(self.edges)


def sample_uniform(mesh: TriMesh, count: int, seed) -> PointCloud:
    """Area-weighted surface samples with face normals."""
    if count < 1:
        raise ValueError("count must be >= 1")
    areas = mesh.face_areas()
    total = float(areas.sum())
    if total < 1e-12:
        raise ZeroArea(f"total surface area {total:g} below 1e-12")
    rng = np.random.default_rng(seed)
    cdf = np.cumsum(areas) / total
    faces = np.searchsorted(cdf, rng.random(count), side="right")
    faces = np.minimum(faces, mesh.n_faces - 1)
    r1 = np.sqrt(rng.random(count))
    r2 = rng.random(count)
    c = mesh.corners()[faces]
    pts = ((1 - r1)[:, None] * c[:, 0] + (r1 * (1 - r2))[:, None] * c[:, 1]
           + (r1 * r2)[:, None] * c[:, 2])
    return PointCloud(pts, mesh.face_normals()[faces])


def detect_sharp_edges(mesh: TriMesh, dihedral_threshold_deg: float = DEFAULT_DIHEDRAL_DEG) -> SharpEdgeSet:
    """Boundary edges plus interior edges whose adjacent face normals differ
    by at least the threshold angle. Edges with more than two faces are
    skipped."""
    if not 0 < dihedral_threshold_deg < 180:
        raise ValueError("dihedral threshold must lie in (0, 180)")
    fn = mesh.face_normals()
    edges, angles, boundary = [], [], []
    for (a, b), fs in sorted(mesh.edge_faces().items()):
        if len(fs) == 1:
            edges.append((a, b))
            angles.append(180.0)
            boundary.append(True)
        elif len(fs) == 2:
            cosang = float(np.clip(np.dot(fn[fs[0]], fn[fs[1]]), -1.0, 1.0))
            ang = float(np.degrees(np.arccos(cosang)))
            if ang >= dihedral_threshold_deg:
                edges.append((a, b))
                angles.append(ang)
                boundary.append(False)
    return SharpEdgeSet(np.array(edges, dtype=np.int64).reshape(-1, 2),
                        np.array(angles, dtype=np.float64),
                        np.array(boundary, dtype=bool),
                        float(dihedral_threshold_deg))


def _edge_normals(mesh: TriMesh, sharp: SharpEdgeSet) -> np.ndarray:
    fn = mesh.face_normals()
    table = mesh.edge_faces()
    out = np.empty((len(sharp), 3))
    for i, (a, b) in enumerate(sharp.edges.tolist()):
        fs = table[(a, b)]
        n = fn[fs].sum(axis=0)
        ln = np.linalg.norm(n)
        # opposite faces (a folded sheet) cancel; keep the first face's normal
        out[i] = n / ln if ln > 1e-12 else fn[fs[0]]
    return out


def sample_importance(mesh: TriMesh, count: int, seed,
                      dihedral_threshold_deg: float = DEFAULT_DIHEDRAL_DEG) -> PointCloud:
    """Sample uniformly by length along sharp and boundary edges.

    The normal at an edge point bisects the two adjacent face normals. Meshes
    without sharp edges fall back to :func:`sample_uniform`, flagged via
    ``used_fallback``.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    sharp = detect_sharp_edges(mesh, dihedral_threshold_deg)
    ends = mesh.vertices[sharp.edges] if len(sharp) else np.zeros((0, 2, 3))
    lengths = np.linalg.norm(ends[:, 1] - ends[:, 0], axis=1) if len(sharp) else np.zeros(0)
    if len(sharp) == 0 or lengths.sum() < 1e-12:
        log.info("no sharp edges at %.1f deg; falling back to uniform sampling",
                 dihedral_threshold_deg)
        pc = sample_uniform(mesh, count, seed)
        return PointCloud(pc.positions, pc.normals, used_fallback=True)
    rng = np.random.default_rng(seed)
    cdf = np.cumsum(lengths) / lengths.sum()
    which = np.minimum(np.searchsorted(cdf, rng.random(count), side="right"), len(sharp) - 1)
    t = rng.random(count)
    pts = ends[which, 0] + t[:, None] * (ends[which, 1] - ends[which, 0])
    return PointCloud(pts, _edge_normals(mesh, sharp)[which])


def farthest_point_sampling(points, target: int, seed=None, start: int | None = None) -> np.ndarray:
    """Greedy farthest point sampling on squared Euclidean distance.

    The start index is ``start`` when given, otherwise drawn from ``seed``;
    each later pick maximises the distance to the picked set, ties going to
    the lowest index.
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    k = len(pts)
    if k < 1:
        raise ValueError("need at least one point")
    if target > k:
        raise TargetExceedsInput(f"target {target} exceeds {k} input points")
    if target <= 0:
        return np.zeros(0, dtype=np.int64)
    if start is None:
        first = int(np.random.default_rng(seed).integers(k))
    elif 0 <= start < k:
        first = int(start)
    else:
        raise IndexError(f"start index {start} outside [0, {k})")
    out = np.empty(target, dtype=np.int64)
    out[0] = first
    diff = pts - pts[first]
    mind = (diff * diff).sum(axis=1)
    mind[first] = -1.0
    for i in range(1, target):
        j = int(np.argmax(mind))
        out[i] = j
        diff = pts - pts[j]
        np.minimum(mind, (diff * diff).sum(axis=1), out=mind)
        mind[j] = -1.0
    return out


def build_point_query(uniform: PointCloud, importance: PointCloud,
                      n_uniform: int, n_importance: int, seed) -> PointQuerySet:
    """FPS run separately on each cloud; the combined query lists uniform
    picks first."""
    rng = np.random.default_rng(seed)
    s_u, s_i = (int(x) for x in rng.integers(0, 2**63 - 1, size=2))
    iu = farthest_point_sampling(uniform.positions, n_uniform, s_u)
    ii = farthest_point_sampling(importance.positions, n_importance, s_i)
    return PointQuerySet(uniform.positions[iu], importance.positions[ii], iu, ii)
