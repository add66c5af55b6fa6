"""Geometry-aware greedy viewpoint selection over UV-texel coverage.

A view covers a texel when the texel's surface point faces the camera
(cosine at least ``cos_threshold``) and nothing blocks the line of sight.
Starting from the fixed orthogonal views, each round adds the candidate that
uncovers the most texels not yet covered.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import InsufficientCandidates
from .mesh_core.atlas import UvAtlas
from .mesh_core.bvh import Bvh, build_bvh, occluded_many
from .mesh_core.mesh import TriMesh

COS_THRESHOLD = 0.2
SURFACE_OFFSET = 1e-4
N_FIXED = 4
N_MAX = 12


@dataclass(frozen=True)
class Viewpoint:
    """Orthographic camera on a sphere around the origin, +z up.

    The image spans ``2 * half_width`` horizontally; pixels are square, so the
    vertical half extent is ``half_width * height / width``.
    """

    azimuth: float
    elevation: float
    distance: float = 3.0
    half_width: float = 1.1

    def __post_init__(self):
        if not -90.0 <= self.elevation <= 90.0:
            raise ValueError("elevation must lie in [-90, 90]")
        if not self.distance > 0:
            raise ValueError("distance must be positive")
        if not self.half_width > 0:
            raise ValueError("half_width must be positive")

    def key(self):
        return (self.azimuth % 360.0, self.elevation, self.distance, self.half_width)

    def same_direction(self, other: "Viewpoint", tol: float = 1e-9) -> bool:
        return float(np.dot(self.forward(), other.forward())) > 1.0 - tol

    def center(self) -> np.ndarray:
        az, el = math.radians(self.azimuth), math.radians(self.elevation)
        return self.distance * np.array(
            [math.cos(el) * math.cos(az), math.cos(el) * math.sin(az), math.sin(el)])

    def forward(self) -> np.ndarray:
        az, el = math.radians(self.azimuth), math.radians(self.elevation)
        return -np.array([math.cos(el) * math.cos(az), math.cos(el) * math.sin(az), math.sin(el)])

    def basis(self):
        """(right, up, forward) unit vectors. ``right`` is the limit of
        forward x z, which stays defined at the poles."""
        az = math.radians(self.azimuth)
        f = self.forward()
        r = np.array([-math.sin(az), math.cos(az), 0.0])
        return r, np.cross(r, f), f

    def project(self, points, width: int, height: int) -> np.ndarray:
        """Continuous pixel coordinates (col, row); pixel centers sit at
        integers and row 0 is the top of the image."""
        r, u, _ = self.basis()
        rel = np.asarray(points, dtype=np.float64) - self.center()
        x = rel @ r
        y = rel @ u
        hh = self.half_width * height / width
        col = (x + self.half_width) / (2 * self.half_width) * width - 0.5
        row = (hh - y) / (2 * hh) * height - 0.5
        return np.stack([col, row], axis=-1)

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, d: dict) -> "Viewpoint":
        return cls(float(d["azimuth"]), float(d["elevation"]),
                   float(d.get("distance", 3.0)), float(d.get("half_width", 1.1)))


def camera_defaults(mesh: TriMesh) -> tuple[float, float]:
    """(distance, half_width) that keep the whole mesh in front of and
    inside the frame of every view."""
    radius = float(np.linalg.norm(mesh.vertices, axis=1).max())
    radius = max(radius, 1e-6)
    return 3.0 * radius, 1.1 * radius


def orthogonal_views(n: int = N_FIXED, distance: float = 3.0, half_width: float = 1.1):
    """``n`` equatorial views evenly spaced in azimuth starting at 0."""
    return [Viewpoint(360.0 * k / n, 0.0, distance, half_width) for k in range(n)]


def default_candidates(distance: float = 3.0, half_width: float = 1.1):
    """44 views: 8 azimuths x 5 elevations, both poles, and two extra
    equatorial views at 22.5 and 202.5 degrees."""
    views = [Viewpoint(az, el, distance, half_width)
             for el in (-45.0, -20.0, 0.0, 20.0, 45.0)
             for az in (0.0, 45.0, 90.0, 135.0, 180.0, 225.0, 270.0, 315.0)]
    views += [Viewpoint(0.0, 90.0, distance, half_width), Viewpoint(0.0, -90.0, distance, half_width)]
    views += [Viewpoint(22.5, 0.0, distance, half_width), Viewpoint(202.5, 0.0, distance, half_width)]
    return views


def uv_cover(view: Viewpoint, mesh: TriMesh, bvh: Bvh | None, atlas: UvAtlas,
             cos_threshold: float = COS_THRESHOLD) -> np.ndarray:
    """Boolean (H, W) mask of texels seen by ``view``."""
    bvh = bvh if bvh is not None else build_bvh(mesh)
    valid = atlas.valid
    pos = atlas.position[valid]
    nrm = atlas.normal[valid]
    to_cam = -view.forward()
    facing = nrm @ to_cam >= cos_threshold
    origins = pos[facing] + SURFACE_OFFSET * nrm[facing]
    t_max = (view.center() - origins) @ to_cam
    seen = t_max > 0
    seen[seen] = ~occluded_many(bvh, origins[seen], to_cam, t_max[seen])
    vis = np.zeros(len(pos), dtype=bool)
    vis[np.nonzero(facing)[0][seen]] = True
    out = np.zeros(valid.shape, dtype=bool)
    out[valid] = vis
    return out


class CoverageCache:
    """Memoises :func:`uv_cover` per viewpoint for one mesh/atlas pair."""

    def __init__(self, mesh: TriMesh, atlas: UvAtlas, bvh: Bvh | None = None,
                 cos_threshold: float = COS_THRESHOLD):
        self.mesh = mesh
        self.atlas = atlas
        self.bvh = bvh if bvh is not None else build_bvh(mesh)
        self.cos_threshold = cos_threshold
        self._masks: dict = {}

    def __call__(self, view: Viewpoint) -> np.ndarray:
        if view not in self._masks:
            self._masks[view] = uv_cover(view, self.mesh, self.bvh, self.atlas, self.cos_threshold)
        return self._masks[view]

    def union(self, views) -> np.ndarray:
        out = np.zeros((self.atlas.height, self.atlas.width), dtype=bool)
        for v in views:
            out |= self(v)
        return out


def coverage_gain(view: Viewpoint, selected, mesh: TriMesh, atlas: UvAtlas,
                  bvh: Bvh | None = None, cos_threshold: float = COS_THRESHOLD,
                  cache: CoverageCache | None = None) -> int:
    """Number of texels covered by ``view`` and by none of ``selected``."""
    cache = cache if cache is not None else CoverageCache(mesh, atlas, bvh, cos_threshold)
    return int(np.count_nonzero(cache(view) & ~cache.union(selected)))


@dataclass
class ViewSet:
    selected: list
    candidates: list
    n_fixed: int
    gains: list = field(default_factory=list)
    covered: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "views": [v.to_json() for v in self.selected],
            "n_fixed": self.n_fixed,
            "gains": list(self.gains),
            "covered": list(self.covered),
            "remaining": [v.to_json() for v in self.candidates],
        }


def greedy_select(candidates, mesh: TriMesh, atlas: UvAtlas, n_fixed: int = N_FIXED,
                  n_max: int = N_MAX, bvh: Bvh | None = None,
                  cos_threshold: float = COS_THRESHOLD, distance: float | None = None,
                  half_width: float | None = None, cache: CoverageCache | None = None) -> ViewSet:
    """Fixed orthogonal views, then ``n_max - n_fixed`` greedy rounds.

    Each round scans the remaining candidates in list order and keeps the
    first one with the strictly largest gain; that view moves from the
    candidate list to the selected list. Candidates that duplicate a fixed
    view are dropped first.
    """
    if not 0 <= n_fixed <= n_max:
        raise ValueError(f"need 0 <= n_fixed <= n_max, got n_fixed={n_fixed}, n_max={n_max}")
    d0, w0 = camera_defaults(mesh)
    distance = d0 if distance is None else distance
    half_width = w0 if half_width is None else half_width
    selected = orthogonal_views(n_fixed, distance, half_width) if n_fixed else []
    pool = [v for v in candidates if not any(v.same_direction(s) for s in selected)]
    if len(pool) < n_max - n_fixed:
        raise InsufficientCandidates(
            f"{len(pool)} usable candidates for {n_max - n_fixed} greedy rounds")
    cache = cache if cache is not None else CoverageCache(mesh, atlas, bvh, cos_threshold)
    covered = cache.union(selected)
    out = ViewSet(selected, pool, n_fixed, [], [int(covered.sum())])
    for _ in range(n_fixed, n_max):
        c_max, i_max = -1, -1
        for i, v in enumerate(pool):
            c = int(np.count_nonzero(cache(v) & ~covered))
            if c > c_max:
                c_max, i_max = c, i
        v_max = pool.pop(i_max)
        selected.append(v_max)
        covered |= cache(v_max)
        out.gains.append(c_max)
        out.covered.append(int(covered.sum()))
    out.selected = selected
    out.candidates = pool
    return out


def save_views(path, views, extra: dict | None = None) -> None:
    payload = {"views": [v.to_json() for v in views]}
    if extra:
        payload.update(extra)
    Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def load_views(path) -> list:
    """Read a JSON list of view objects, or an object with a ``views`` list."""
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if isinstance(data, dict):
        data = data["views"]
    return [Viewpoint.from_json(d) for d in data]
