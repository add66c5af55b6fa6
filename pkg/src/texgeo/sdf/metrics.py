"""Monte-Carlo volume and near-surface IoU between two solids."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import NoOccupiedSamples
from ..mesh_core.bvh import build_bvh
from ..mesh_core.mesh import TriMesh
from ..sampling import sample_uniform
from .field import inside_mask, unsigned_distance

S_IOU_BAND_FRACTION = 0.02


@dataclass(frozen=True)
class AnalyticSphere:
    """Exact sphere usable wherever a watertight mesh is accepted by the IoU
    metrics."""

    center: tuple = (0.0, 0.0, 0.0)
    radius: float = 1.0

    def sdf(self, points) -> np.ndarray:
        p = np.asarray(points, dtype=np.float64).reshape(-1, 3)
        return np.linalg.norm(p - np.asarray(self.center), axis=1) - self.radius

    def bounds(self):
        c = np.asarray(self.center, dtype=np.float64)
        return c - self.radius, c + self.radius


class _Solid:
    def __init__(self, obj):
        self.obj = obj
        self.bvh = build_bvh(obj) if isinstance(obj, TriMesh) else None

    def bounds(self):
        return self.obj.bounds()

    def inside(self, pts):
        if self.bvh is None:
            return self.obj.sdf(pts) < 0
        return inside_mask(self.bvh, self.obj, pts)


def volume_iou(mesh_a, mesh_b, sample_count: int = 200_000, seed=0) -> float:
    """|A and B| / |A or B| over uniform samples in the union of both bounding
    boxes. Either argument may be a watertight TriMesh or an AnalyticSphere."""
    if sample_count < 1:
        raise ValueError("sample_count must be >= 1")
    a, b = _Solid(mesh_a), _Solid(mesh_b)
    lo = np.minimum(a.bounds()[0], b.bounds()[0])
    hi = np.maximum(a.bounds()[1], b.bounds()[1])
    rng = np.random.default_rng(seed)
    pts = lo + rng.random((sample_count, 3)) * (hi - lo)
    ia, ib = a.inside(pts), b.inside(pts)
    union = int(np.count_nonzero(ia | ib))
    if union == 0:
        raise NoOccupiedSamples("no sample fell inside either solid")
    return int(np.count_nonzero(ia & ib)) / union


def default_band(mesh_a: TriMesh, mesh_b: TriMesh) -> float:
    lo = np.minimum(mesh_a.bounds()[0], mesh_b.bounds()[0])
    hi = np.maximum(mesh_a.bounds()[1], mesh_b.bounds()[1])
    return S_IOU_BAND_FRACTION * float(np.linalg.norm(hi - lo))


def surface_iou(mesh_a: TriMesh, mesh_b: TriMesh, band: float | None = None,
                sample_count: int = 100_000, seed=0) -> float:
    """IoU of the two near-surface bands ``|d| <= band``.

    ``sample_count`` points are drawn on each surface and pushed along the
    normal by a uniform offset in [-band, band]; the indicator sets are taken
    over both batches together. ``band`` defaults to 2% of the union
    bounding-box diagonal.
    """
    if band is None:
        band = default_band(mesh_a, mesh_b)
    if not band > 0:
        raise ValueError("band must be positive")
    if sample_count < 1:
        raise ValueError("sample_count must be >= 1")
    ss = np.random.SeedSequence(seed)
    sa, sb, so = ss.spawn(3)
    rng = np.random.default_rng(so)
    pts = []
    for mesh, s in ((mesh_a, sa), (mesh_b, sb)):
        pc = sample_uniform(mesh, sample_count, np.random.default_rng(s))
        off = rng.uniform(-band, band, size=sample_count)
        pts.append(pc.positions + off[:, None] * pc.normals)
    pts = np.concatenate(pts)
    near_a = unsigned_distance(build_bvh(mesh_a), pts) <= band
    near_b = unsigned_distance(build_bvh(mesh_b), pts) <= band
    union = int(np.count_nonzero(near_a | near_b))
    if union == 0:
        return 0.0
    return int(np.count_nonzero(near_a & near_b)) / union
