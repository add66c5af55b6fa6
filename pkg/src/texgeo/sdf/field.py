"""Signed distance to a triangle mesh and regular-grid sampling."""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import NotWatertight, ParseError
from ..mesh_core.bvh import Bvh, build_bvh, closest_points, count_crossings
from ..mesh_core.mesh import TriMesh

# Parity is read along +x; rays that touch an edge or vertex are re-cast
# along two generic directions and the three parities vote.
SIGN_DIRECTIONS = np.array([
    [1.0, 0.0, 0.0],
    [-0.3107, 0.8261, 0.4701],
    [0.2741, -0.4108, 0.8697],
])
SIGN_DIRECTIONS /= np.linalg.norm(SIGN_DIRECTIONS, axis=1, keepdims=True)

DEFAULT_DOMAIN = ((-1.0, -1.0, -1.0), (1.0, 1.0, 1.0))


def _require_watertight(mesh: TriMesh):
    if "watertight" not in mesh._cache:
        mesh._cache["watertight"] = mesh.is_watertight()
    if not mesh._cache["watertight"]:
        raise NotWatertight("sign requested on a mesh with open or non-manifold edges")


def inside_mask(bvh: Bvh, mesh: TriMesh, points) -> np.ndarray:
    """True for points enclosed by the (watertight) mesh, by crossing parity."""
    _require_watertight(mesh)
    pts = np.ascontiguousarray(points, dtype=np.float64).reshape(-1, 3)
    counts, amb = count_crossings(bvh, pts, SIGN_DIRECTIONS[0])
    inside = (counts % 2) == 1
    if amb.any():
        sub = pts[amb]
        votes = inside[amb].astype(np.int64)
        for d in SIGN_DIRECTIONS[1:]:
            c, _ = count_crossings(bvh, sub, d)
            votes += c % 2
        inside[amb] = votes >= 2
    return inside


def unsigned_distance(bvh: Bvh, points) -> np.ndarray:
    return closest_points(bvh, points)[0]


def signed_distance_many(bvh: Bvh, mesh: TriMesh, points) -> np.ndarray:
    """Exact distance to the surface, negative inside."""
    pts = np.ascontiguousarray(points, dtype=np.float64).reshape(-1, 3)
    inside = inside_mask(bvh, mesh, pts)
    d = unsigned_distance(bvh, pts)
    return np.where(inside, -d, d)


def signed_distance(bvh: Bvh, mesh: TriMesh, point) -> float:
    return float(signed_distance_many(bvh, mesh, np.asarray(point, dtype=np.float64)[None])[0])


@dataclass(frozen=True, eq=False)
class SdfGrid:
    """Signed distances on a regular lattice.

    ``values[i, j, k]`` is the field at ``origin + spacing * (i, j, k)``.
    """

    dims: tuple
    origin: np.ndarray
    spacing: float
    values: np.ndarray

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if len(dims) != 3 or min(dims) < 2:
            raise ValueError("grid dims must be three values >= 2")
        if not self.spacing > 0:
            raise ValueError("grid spacing must be positive")
        vals = np.asarray(self.values)
        if vals.dtype not in (np.float32, np.float64):
            vals = vals.astype(np.float64)
        vals = vals.reshape(dims)
        if not np.all(np.isfinite(vals)):
            raise ValueError("grid values must be finite")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "origin", np.asarray(self.origin, dtype=np.float64).reshape(3))
        object.__setattr__(self, "spacing", float(self.spacing))
        object.__setattr__(self, "values", vals)

    def lattice_points(self) -> np.ndarray:
        """(Nx, Ny, Nz, 3) world coordinates of lattice points."""
        axes = [self.origin[a] + self.spacing * np.arange(self.dims[a]) for a in range(3)]
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)


def _lattice(dims, domain):
    if np.isscalar(dims):
        dims = (int(dims),) * 3
    dims = tuple(int(d) for d in dims)
    if len(dims) != 3 or min(dims) < 2:
        raise ValueError("grid dims must be three values >= 2")
    lo = np.asarray(domain[0], dtype=np.float64)
    hi = np.asarray(domain[1], dtype=np.float64)
    steps = (hi - lo) / (np.array(dims) - 1)
    if np.any(steps <= 0) or np.ptp(steps) > 1e-12 * steps.max():
        raise ValueError("domain and dims must give the same spacing on every axis")
    return dims, lo, float(steps[0])


def grid_from_function(fn, dims, domain=DEFAULT_DOMAIN) -> SdfGrid:
    """Sample a vectorised field ``fn(points (n, 3)) -> (n,)`` on a lattice."""
    dims, lo, h = _lattice(dims, domain)
    axes = [lo[a] + h * np.arange(dims[a]) for a in range(3)]
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3)
    return SdfGrid(dims, lo, h, np.asarray(fn(pts), dtype=np.float64).reshape(dims))


def sample_sdf_grid(mesh: TriMesh, dims, domain=DEFAULT_DOMAIN, bvh: Bvh | None = None) -> SdfGrid:
    """Signed distance at every lattice point spanning ``domain`` inclusively."""
    bvh = bvh if bvh is not None else build_bvh(mesh)
    return grid_from_function(lambda p: signed_distance_many(bvh, mesh, p), dims, domain)


_HEADER = struct.Struct("<3I3dd")


def save_sdf_grid(grid: SdfGrid, path) -> None:
    """Little-endian: u32 dims[3], f64 origin[3], f64 spacing, then f32
    values with x varying fastest."""
    head = _HEADER.pack(*grid.dims, *grid.origin.tolist(), grid.spacing)
    body = np.asarray(grid.values, dtype="<f4").ravel(order="F").tobytes()
    Path(path).write_bytes(head + body)


def load_sdf_grid(path) -> SdfGrid:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(str(path))
    raw = path.read_bytes()
    if len(raw) < _HEADER.size:
        raise ParseError("truncated grid header", path)
    nx, ny, nz, ox, oy, oz, h = _HEADER.unpack_from(raw, 0)
    n = nx * ny * nz
    if len(raw) != _HEADER.size + 4 * n:
        raise ParseError(f"expected {n} float32 values", path)
    vals = np.frombuffer(raw, dtype="<f4", offset=_HEADER.size).reshape((nx, ny, nz), order="F")
    try:
        return SdfGrid((nx, ny, nz), (ox, oy, oz), h, vals.astype(np.float32))
    except ValueError as exc:
        raise ParseError(str(exc), path) from None
