"""Table-driven marching cubes over an :class:`SdfGrid`.

Classic 256-case lookup with linear interpolation along cell edges. No
asymptotic decider: ambiguous faces take whatever the table says. Vertices
are keyed by the lattice edge they sit on, so neighbouring cells share them.
"""

from __future__ import annotations

import numpy as np

from ..errors import EmptySurface
from ..mesh_core.mesh import TriMesh
from ._tables import CORNER_OFFSETS, EDGE_CORNERS, TRI_TABLE
from .field import SdfGrid

_OFFSETS = np.array(CORNER_OFFSETS, dtype=np.int64)
_N_TRI = np.array([len(r) // 3 for r in TRI_TABLE], dtype=np.int64)
_TRI = np.full((256, 5, 3), -1, dtype=np.int64)
for _c, _row in enumerate(TRI_TABLE):
    for _t in range(len(_row) // 3):
        _TRI[_c, _t] = _row[3 * _t:3 * _t + 3]

# Per table edge: lower lattice corner offset and axis of the edge.
_EDGE_BASE = np.empty((12, 3), dtype=np.int64)
_EDGE_AXIS = np.empty(12, dtype=np.int64)
for _e, (_a, _b) in enumerate(EDGE_CORNERS):
    _pa, _pb = _OFFSETS[_a], _OFFSETS[_b]
    _EDGE_BASE[_e] = np.minimum(_pa, _pb)
    _EDGE_AXIS[_e] = int(np.nonzero(_pa != _pb)[0][0])


def marching_cubes(grid: SdfGrid, iso: float = 0.0) -> TriMesh:
    """Extract the ``iso`` level set. Faces are wound so normals point toward
    increasing field values (outward for an SDF)."""
    v = np.asarray(grid.values, dtype=np.float64)
    nx, ny, nz = v.shape
    below = v < iso
    case = np.zeros((nx - 1, ny - 1, nz - 1), dtype=np.int64)
    for bit, (dx, dy, dz) in enumerate(CORNER_OFFSETS):
        case |= below[dx:nx - 1 + dx, dy:ny - 1 + dy, dz:nz - 1 + dz].astype(np.int64) << bit
    active = (case != 0) & (case != 255)
    if not active.any():
        raise EmptySurface(f"iso level {iso:g} is not crossed anywhere in the grid")

    cells = np.argwhere(active)
    cases = case[active]
    ntri = _N_TRI[cases]
    cell_of_tri = np.repeat(np.arange(len(cells)), ntri)
    slot = np.arange(len(cell_of_tri)) - np.repeat(np.cumsum(ntri) - ntri, ntri)
    tri_edges = _TRI[cases[cell_of_tri], slot]                     # (T, 3)

    base = cells[cell_of_tri][:, None, :] + _EDGE_BASE[tri_edges]  # (T, 3, 3)
    axis = _EDGE_AXIS[tri_edges]
    key = ((base[..., 0] * ny + base[..., 1]) * nz + base[..., 2]) * 3 + axis
    uniq, inverse = np.unique(key.ravel(), return_inverse=True)
    faces = inverse.reshape(-1, 3)

    axis_u = uniq % 3
    lin = uniq // 3
    i0 = lin // (ny * nz)
    j0 = (lin // nz) % ny
    k0 = lin % nz
    step = np.eye(3, dtype=np.int64)[axis_u]
    f0 = v[i0, j0, k0]
    f1 = v[i0 + step[:, 0], j0 + step[:, 1], k0 + step[:, 2]]
    t = (iso - f0) / (f1 - f0)
    lattice = np.stack([i0, j0, k0], axis=1).astype(np.float64) + t[:, None] * step
    verts = grid.origin + grid.spacing * lattice
    # The table winds triangles toward the below-iso side; flip to face outward.
    return TriMesh(verts, faces[:, ::-1])
