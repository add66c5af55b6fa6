"""Indexed triangle mesh container and small geometric helpers."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..errors import DegenerateExtent, EmptyMesh, ParseError

NORMAL_TOL = 1e-6
UV_TOL = 1e-9

UNIT_CUBE_EXTENT = 1.9


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class TriMesh:
    """Triangle mesh with optional per-vertex normals and per-corner UVs.

    ``vertices`` is (V, 3) float64, ``faces`` is (F, 3) int64, ``normals`` is
    (V, 3) or None, ``uvs`` is (F, 3, 2) or None. Arrays are copied and made
    read-only on construction.
    """

    vertices: np.ndarray
    faces: np.ndarray
    normals: Optional[np.ndarray] = None
    uvs: Optional[np.ndarray] = None
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        v = _frozen(self.vertices, np.float64).reshape(-1, 3)
        f = _frozen(self.faces, np.int64).reshape(-1, 3)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "faces", f)
        if f.size and (f.min() < 0 or f.max() >= len(v)):
            raise ValueError("face index out of range")
        if not np.all(np.isfinite(v)):
            raise ValueError("non-finite vertex coordinate")
        if self.normals is not None:
            n = _frozen(self.normals, np.float64).reshape(-1, 3)
            if len(n) != len(v):
                raise ValueError("normals must be per-vertex")
            if len(n) and np.max(np.abs(np.linalg.norm(n, axis=1) - 1.0)) > NORMAL_TOL:
                raise ValueError("normals must have unit length")
            object.__setattr__(self, "normals", n)
        if self.uvs is not None:
            uv = _frozen(self.uvs, np.float64).reshape(-1, 3, 2)
            if len(uv) != len(f):
                raise ValueError("uvs must be per-corner, shape (F, 3, 2)")
            if uv.size and (uv.min() < -UV_TOL or uv.max() > 1 + UV_TOL):
                raise ValueError("uv coordinates must lie in [0, 1]")
            object.__setattr__(self, "uvs", uv)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    def replace(self, **changes) -> "TriMesh":
        kw = dict(vertices=self.vertices, faces=self.faces,
                  normals=self.normals, uvs=self.uvs)
        kw.update(changes)
        return TriMesh(**kw)

    def corners(self) -> np.ndarray:
        """(F, 3, 3) array of triangle corner positions."""
        return self.vertices[self.faces]

    def face_normals(self) -> np.ndarray:
        """Unit face normals; degenerate faces get a zero vector."""
        if "face_normals" not in self._cache:
            c = self.corners()
            n = np.cross(c[:, 1] - c[:, 0], c[:, 2] - c[:, 0])
            ln = np.linalg.norm(n, axis=1)
            out = np.zeros_like(n)
            ok = ln > 0
            out[ok] = n[ok] / ln[ok, None]
            out.setflags(write=False)
            self._cache["face_normals"] = out
        return self._cache["face_normals"]

    def face_areas(self) -> np.ndarray:
        if "face_areas" not in self._cache:
            c = self.corners()
            a = 0.5 * np.linalg.norm(
                np.cross(c[:, 1] - c[:, 0], c[:, 2] - c[:, 0]), axis=1)
            a.setflags(write=False)
            self._cache["face_areas"] = a
        return self._cache["face_areas"]

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    def diagonal(self) -> float:
        lo, hi = self.bounds()
        return float(np.linalg.norm(hi - lo))

    def edge_faces(self) -> dict:
        """Map undirected edge (a, b) with a < b to the list of incident faces."""
        if "edge_faces" not in self._cache:
            table: dict = {}
            for fi, (a, b, c) in enumerate(self.faces.tolist()):
                for u, w in ((a, b), (b, c), (c, a)):
                    key = (u, w) if u < w else (w, u)
                    table.setdefault(key, []).append(fi)
            self._cache["edge_faces"] = table
        return self._cache["edge_faces"]

    def is_watertight(self) -> bool:
        return self.n_faces > 0 and all(
            len(fs) == 2 for fs in self.edge_faces().values())

    def is_manifold(self) -> bool:
        """Every edge is shared by at most two faces."""
        return all(len(fs) <= 2 for fs in self.edge_faces().values())

    def vertex_neighbors(self) -> list[list[int]]:
        """Sorted one-ring vertex neighbors, from face connectivity."""
        nbrs: list[set] = [set() for _ in range(self.n_vertices)]
        for a, b in self.edge_faces():
            nbrs[a].add(b)
            nbrs[b].add(a)
        return [sorted(s) for s in nbrs]


def check_face_indices(faces, n_vertices, path=None, lines=None):
    """Raise ParseError on the first face referencing a missing vertex."""
    faces = np.asarray(faces, dtype=np.int64).reshape(-1, 3)
    bad = np.nonzero((faces < 0).any(axis=1) | (faces >= n_vertices).any(axis=1))[0]
    if len(bad):
        i = int(bad[0])
        line = lines[i] if lines is not None else None
        raise ParseError(
            f"face {i} references vertex outside [0, {n_vertices})", path, line)


def normalize_to_unit_cube(mesh: TriMesh) -> TriMesh:
    """Uniformly scale and translate so the bounding box is centered at the
    origin with its longest side equal to 1.9."""
    if mesh.n_faces == 0 or mesh.n_vertices == 0:
        raise EmptyMesh("cannot normalize an empty mesh")
    lo, hi = mesh.bounds()
    if np.linalg.norm(hi - lo) < 1e-12:
        raise DegenerateExtent("bounding-box diagonal below 1e-12")
    center = 0.5 * (lo + hi)
    scale = UNIT_CUBE_EXTENT / float(np.max(hi - lo))
    return mesh.replace(vertices=(mesh.vertices - center) * scale)
