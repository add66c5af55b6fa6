"""Texel-to-surface correspondence by rasterizing per-corner UV triangles."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from ..errors import MissingUvs
from .mesh import TriMesh

# Texel centers within this barycentric slack of a triangle edge count as inside.
INSIDE_EPS = 1e-12


@dataclass(frozen=True, eq=False)
class UvAtlas:
    """Per-texel surface record for a ``height x width`` texture.

    Row ``i``, column ``j`` is centered at ``uv = ((j + .5) / width, (i + .5) / height)``,
    so row 0 sits at the bottom of UV space (v near 0). Invalid texels have
    ``face == -1`` and zeroed records.
    """

    width: int
    height: int
    face: np.ndarray       # (H, W) int64
    bary: np.ndarray       # (H, W, 3)
    position: np.ndarray   # (H, W, 3)
    normal: np.ndarray     # (H, W, 3)

    @property
    def valid(self) -> np.ndarray:
        return self.face >= 0

    @property
    def n_valid(self) -> int:
        return int(np.count_nonzero(self.face >= 0))

    def texel_uv(self) -> np.ndarray:
        """(H, W, 2) UV coordinates of texel centers."""
        u = (np.arange(self.width) + 0.5) / self.width
        v = (np.arange(self.height) + 0.5) / self.height
        uu, vv = np.meshgrid(u, v)
        return np.stack([uu, vv], axis=-1)


@njit(cache=True)
def _rasterize(uvs, skip, width, height, eps):
    face = np.full((height, width), -1, np.int64)
    bary = np.zeros((height, width, 3))
    for f in range(uvs.shape[0]):
        if skip[f]:
            continue
        # texel-space coordinates
        x0 = uvs[f, 0, 0] * width
        y0 = uvs[f, 0, 1] * height
        x1 = uvs[f, 1, 0] * width
        y1 = uvs[f, 1, 1] * height
        x2 = uvs[f, 2, 0] * width
        y2 = uvs[f, 2, 1] * height
        den = (y1 - y2) * (x0 - x2) + (x2 - x1) * (y0 - y2)
        if den == 0.0:
            continue
        jmin = max(0, int(np.floor(min(x0, x1, x2) - 0.5)))
        jmax = min(width - 1, int(np.ceil(max(x0, x1, x2) - 0.5)))
        imin = max(0, int(np.floor(min(y0, y1, y2) - 0.5)))
        imax = min(height - 1, int(np.ceil(max(y0, y1, y2) - 0.5)))
        for i in range(imin, imax + 1):
            py = i + 0.5
            for j in range(jmin, jmax + 1):
                if face[i, j] >= 0:
                    continue
                px = j + 0.5
                b0 = ((y1 - y2) * (px - x2) + (x2 - x1) * (py - y2)) / den
                b1 = ((y2 - y0) * (px - x2) + (x0 - x2) * (py - y2)) / den
                b2 = 1.0 - b0 - b1
                if b0 < -eps or b1 < -eps or b2 < -eps:
                    continue
                b0 = max(b0, 0.0)
                b1 = max(b1, 0.0)
                b2 = max(b2, 0.0)
                s = b0 + b1 + b2
                face[i, j] = f
                bary[i, j, 0] = b0 / s
                bary[i, j, 1] = b1 / s
                bary[i, j, 2] = b2 / s
    return face, bary


def rasterize_uv_atlas(mesh: TriMesh, width: int, height: int) -> UvAtlas:
    """Map every texel center to the lowest-index face whose UV triangle
    contains it. Faces with zero 3D area are skipped."""
    if mesh.uvs is None:
        raise MissingUvs("mesh has no per-corner UVs")
    width, height = int(width), int(height)
    if width < 1 or height < 1:
        raise ValueError("atlas width and height must be >= 1")
    fn = mesh.face_normals()
    skip = ~np.any(fn != 0.0, axis=1)
    face, bary = _rasterize(np.ascontiguousarray(mesh.uvs), skip, width, height, INSIDE_EPS)
    valid = face >= 0
    corners = mesh.corners()
    position = np.zeros((height, width, 3))
    normal = np.zeros((height, width, 3))
    fv = face[valid]
    position[valid] = np.einsum("nk,nkd->nd", bary[valid], corners[fv])
    normal[valid] = fn[fv]
    for a in (face, bary, position, normal):
        a.setflags(write=False)
    return UvAtlas(width, height, face, bary, position, normal)
