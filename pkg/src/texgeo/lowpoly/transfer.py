"""Color transfer from a textured dense mesh to a decimated one, and rebaking."""

from __future__ import annotations

import math

import numpy as np

from ..errors import MissingUvs, NoSeedTexels
from ..mesh_core.atlas import UvAtlas, rasterize_uv_atlas
from ..mesh_core.mesh import TriMesh
from ..texture_bake import TextureMap, VertexColors, texture_to_vertex_colors
from .kdtree import KdTree

MIN_CELL = 4


def per_face_chart_uvs(mesh: TriMesh, size: int) -> np.ndarray:
    """(F, 3, 2) UVs giving every face its own right triangle in a square
    grid of cells on a ``size x size`` texture.

    Triangle corners sit on texel centers and each cell keeps its last
    texel row and column empty, so charts never touch.
    """
    size = int(size)
    g = max(1, math.ceil(math.sqrt(mesh.n_faces)))
    cell = size // g
    if cell < MIN_CELL:
        raise ValueError(f"texture size {size} too small for {mesh.n_faces} face charts")
    k = np.arange(mesh.n_faces)
    ox = (k % g) * cell + 0.5
    oy = (k // g) * cell + 0.5
    leg = cell - 2.0
    uv = np.empty((mesh.n_faces, 3, 2))
    uv[:, 0] = np.stack([ox, oy], axis=1)
    uv[:, 1] = np.stack([ox + leg, oy], axis=1)
    uv[:, 2] = np.stack([ox, oy + leg], axis=1)
    return uv / size


def ensure_uvs(mesh: TriMesh, size: int, fallback: bool = True) -> TriMesh:
    if mesh.uvs is not None:
        return mesh
    if not fallback:
        raise MissingUvs("low-poly mesh has no UVs and the chart fallback is off")
    return mesh.replace(uvs=per_face_chart_uvs(mesh, size))


def transfer_texture(dense: TriMesh, atlas: UvAtlas, tex: TextureMap, low: TriMesh) -> VertexColors:
    """Each low-poly vertex takes the color of the nearest textured dense vertex."""
    vc = texture_to_vertex_colors(dense, atlas, tex)
    seeds = np.nonzero(vc.textured)[0]
    if len(seeds) == 0:
        raise NoSeedTexels("dense texture reaches no vertex")
    tree = KdTree(dense.vertices[seeds], payload=vc.colors[seeds])
    idx, _ = tree.nearest_many(low.vertices)
    return VertexColors(tree.payload[idx].copy(), np.ones(low.n_vertices, dtype=bool))


def rebake_lowpoly(low: TriMesh, colors: VertexColors, size: int,
                   fallback: bool = True) -> tuple[TextureMap, TriMesh]:
    """Barycentric interpolation of vertex colors into a ``size x size``
    texture. Returns the texture and the mesh it was baked on (which gains
    per-face chart UVs if it had none)."""
    if len(colors) != low.n_vertices:
        raise ValueError("one color per low-poly vertex is required")
    low = ensure_uvs(low, size, fallback)
    atlas = rasterize_uv_atlas(low, size, size)
    valid = atlas.valid
    rgb = np.zeros((size, size, 3))
    fv = low.faces[atlas.face[valid]]
    rgb[valid] = np.einsum("nk,nkc->nc", atlas.bary[valid], colors.colors[fv])
    return TextureMap(size, size, rgb, valid.copy()), low
