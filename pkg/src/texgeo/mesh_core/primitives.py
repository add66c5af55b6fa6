"""Procedural test shapes."""

from __future__ import annotations

import numpy as np

from .mesh import TriMesh


def _orient_outward(vertices, faces, center=(0.0, 0.0, 0.0)):
    c = vertices[faces]
    n = np.cross(c[:, 1] - c[:, 0], c[:, 2] - c[:, 0])
    inward = np.einsum("ij,ij->i", n, c.mean(axis=1) - np.asarray(center)) < 0
    faces = faces.copy()
    faces[inward] = faces[inward][:, ::-1]
    return faces, inward


def icosphere(subdivisions: int = 4, radius: float = 1.0) -> TriMesh:
    """Geodesic sphere with 20 * 4**subdivisions faces."""
    t = (1.0 + 5 ** 0.5) / 2.0
    verts = [(-1, t, 0), (1, t, 0), (-1, -t, 0), (1, -t, 0),
             (0, -1, t), (0, 1, t), (0, -1, -t), (0, 1, -t),
             (t, 0, -1), (t, 0, 1), (-t, 0, -1), (-t, 0, 1)]
    verts = [np.array(v, dtype=float) / np.linalg.norm(v) for v in verts]
    faces = [(0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
             (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
             (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
             (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1)]
    for _ in range(subdivisions):
        midpoint = {}

        def mid(a, b):
            key = (a, b) if a < b else (b, a)
            if key not in midpoint:
                m = verts[a] + verts[b]
                verts.append(m / np.linalg.norm(m))
                midpoint[key] = len(verts) - 1
            return midpoint[key]

        nxt = []
        for a, b, c in faces:
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            nxt += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = nxt
    v = np.array(verts) * radius
    f, _ = _orient_outward(v, np.array(faces, dtype=np.int64))
    return TriMesh(v, f)


def box(lo=(0.0, 0.0, 0.0), hi=(1.0, 1.0, 1.0)) -> TriMesh:
    """Axis-aligned box as 12 outward-wound triangles."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    corners = np.array([[x, y, z] for z in (0, 1) for y in (0, 1) for x in (0, 1)], dtype=float)
    v = lo + corners * (hi - lo)
    quads = [(0, 2, 3, 1), (4, 5, 7, 6), (0, 1, 5, 4), (2, 6, 7, 3), (0, 4, 6, 2), (1, 3, 7, 5)]
    faces = []
    for a, b, c, d in quads:
        faces += [(a, b, c), (a, c, d)]
    f, _ = _orient_outward(v, np.array(faces, dtype=np.int64), center=0.5 * (lo + hi))
    return TriMesh(v, f)


def plane_grid(nx: int = 10, ny: int = 10, size=(1.0, 1.0), z: float = 0.0) -> TriMesh:
    """Flat ``nx`` by ``ny`` quad grid in the plane ``z``, 2*nx*ny triangles,
    with UVs spanning the unit square."""
    xs = np.linspace(0.0, size[0], nx + 1)
    ys = np.linspace(0.0, size[1], ny + 1)
    gx, gy = np.meshgrid(xs, ys)
    v = np.stack([gx.ravel(), gy.ravel(), np.full(gx.size, z)], axis=1)
    idx = np.arange((nx + 1) * (ny + 1)).reshape(ny + 1, nx + 1)
    faces = []
    for j in range(ny):
        for i in range(nx):
            a, b, c, d = idx[j, i], idx[j, i + 1], idx[j + 1, i + 1], idx[j + 1, i]
            faces += [(a, b, c), (a, c, d)]
    f = np.array(faces, dtype=np.int64)
    uv = v[:, :2] / np.asarray(size, dtype=float)
    return TriMesh(v, f, uvs=uv[f])


def uv_sphere(n_lon: int = 64, n_lat: int = 32, radius: float = 1.0) -> TriMesh:
    """Sphere whose UV map is (approximately) area-preserving.

    Rings are spaced uniformly in z and mapped to ``v = (z/r + 1) / 2``,
    ``u = azimuth / 2pi`` (Lambert cylindrical projection), so equal UV areas
    cover equal surface areas. The seam is handled by per-corner UVs.
    """
    zs = 1.0 - 2.0 * np.arange(n_lat + 1) / n_lat
    phis = 2 * np.pi * np.arange(n_lon) / n_lon
    verts = [(0.0, 0.0, 1.0)]
    for z in zs[1:-1]:
        rr = np.sqrt(max(0.0, 1.0 - z * z))
        verts += [(rr * np.cos(p), rr * np.sin(p), z) for p in phis]
    verts.append((0.0, 0.0, -1.0))
    v = np.array(verts) * radius
    bottom = len(verts) - 1

    def ring(k, j):
        return 1 + (k - 1) * n_lon + (j % n_lon)

    faces, uvs = [], []
    for j in range(n_lon):
        u0, u1, um = j / n_lon, (j + 1) / n_lon, (j + 0.5) / n_lon
        faces.append((0, ring(1, j), ring(1, j + 1)))
        uvs.append([(um, 1.0), (u0, (zs[1] + 1) / 2), (u1, (zs[1] + 1) / 2)])
        for k in range(1, n_lat - 1):
            va, vb = (zs[k] + 1) / 2, (zs[k + 1] + 1) / 2
            a, b = ring(k, j), ring(k, j + 1)
            c, d = ring(k + 1, j + 1), ring(k + 1, j)
            faces += [(a, d, c), (a, c, b)]
            uvs += [[(u0, va), (u0, vb), (u1, vb)], [(u0, va), (u1, vb), (u1, va)]]
        kk = n_lat - 1
        faces.append((bottom, ring(kk, j + 1), ring(kk, j)))
        uvs.append([(um, 0.0), (u1, (zs[kk] + 1) / 2), (u0, (zs[kk] + 1) / 2)])
    f = np.array(faces, dtype=np.int64)
    uv = np.array(uvs, dtype=float)
    f2, flipped = _orient_outward(v, f)
    uv[flipped] = uv[flipped][:, ::-1]
    return TriMesh(v, f2, uvs=np.clip(uv, 0.0, 1.0))


def quad(half: float = 1.0) -> TriMesh:
    """Square of side ``2*half`` in the plane x = 0 facing +x, UVs
    ``u = (y/half + 1)/2``, ``v = (z/half + 1)/2``."""
    v = np.array([[0, -half, -half], [0, half, -half], [0, half, half], [0, -half, half]], float)
    f = np.array([[0, 1, 2], [0, 2, 3]], dtype=np.int64)
    uv = (v[:, 1:] / half + 1.0) / 2.0
    return TriMesh(v, f, uvs=uv[f])
