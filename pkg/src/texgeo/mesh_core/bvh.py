"""Bounding-volume hierarchy over triangles with ray and closest-point queries.

Nodes are split at the median centroid along the longest axis of the node's
centroid bounds, down to leaves of at most ``LEAF_SIZE`` faces. Ray/triangle
tests use the watertight formulation of Woop, Benthin and Wald (2013), so a
ray crossing a shared edge cannot slip between the two triangles.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np
from numba import njit

from ..errors import EmptyMesh
from .mesh import TriMesh

LEAF_SIZE = 8
RAY_T_MIN = 1e-6

_JIT = dict(cache=True, nogil=True, error_model="numpy")


@njit(**_JIT)
def _build(tri_lo, tri_hi, centroid, leaf_size, pad):
    n = centroid.shape[0]
    max_nodes = 2 * n
    node_lo = np.empty((max_nodes, 3))
    node_hi = np.empty((max_nodes, 3))
    left = np.full(max_nodes, -1, np.int64)
    right = np.full(max_nodes, -1, np.int64)
    start = np.zeros(max_nodes, np.int64)
    count = np.zeros(max_nodes, np.int64)
    order = np.arange(n)

    st_node = np.empty(max_nodes, np.int64)
    st_s = np.empty(max_nodes, np.int64)
    st_e = np.empty(max_nodes, np.int64)
    sp = 0
    st_node[0] = 0
    st_s[0] = 0
    st_e[0] = n
    sp = 1
    n_nodes = 1
    while sp > 0:
        sp -= 1
        node = st_node[sp]
        s = st_s[sp]
        e = st_e[sp]
        for a in range(3):
            lo = np.inf
            hi = -np.inf
            for i in range(s, e):
                f = order[i]
                if tri_lo[f, a] < lo:
                    lo = tri_lo[f, a]
                if tri_hi[f, a] > hi:
                    hi = tri_hi[f, a]
            node_lo[node, a] = lo - pad
            node_hi[node, a] = hi + pad
        cnt = e - s
        start[node] = s
        if cnt <= leaf_size:
            count[node] = cnt
            continue
        axis = 0
        best = -1.0
        for a in range(3):
            lo = np.inf
            hi = -np.inf
            for i in range(s, e):
                c = centroid[order[i], a]
                if c < lo:
                    lo = c
                if c > hi:
                    hi = c
            if hi - lo > best:
                best = hi - lo
                axis = a
        seg = order[s:e].copy()
        keys = np.empty(cnt)
        for i in range(cnt):
            keys[i] = centroid[seg[i], axis]
        perm = np.argsort(keys, kind="mergesort")
        for i in range(cnt):
            order[s + i] = seg[perm[i]]
        mid = s + cnt // 2
        lnode = n_nodes
        rnode = n_nodes + 1
        n_nodes += 2
        left[node] = lnode
        right[node] = rnode
        count[node] = 0
        st_node[sp] = rnode
        st_s[sp] = mid
        st_e[sp] = e
        sp += 1
        st_node[sp] = lnode
        st_s[sp] = s
        st_e[sp] = mid
        sp += 1
    return (node_lo[:n_nodes].copy(), node_hi[:n_nodes].copy(), left[:n_nodes].copy(),
            right[:n_nodes].copy(), start[:n_nodes].copy(), count[:n_nodes].copy(), order)


@dataclass(frozen=True, eq=False)
class Bvh:
    """Flattened BVH. Node 0 is the root; a node with ``count > 0`` is a leaf
    owning ``order[start:start + count]``."""

    node_lo: np.ndarray
    node_hi: np.ndarray
    left: np.ndarray
    right: np.ndarray
    start: np.ndarray
    count: np.ndarray
    order: np.ndarray
    v0: np.ndarray
    v1: np.ndarray
    v2: np.ndarray

    @property
    def n_faces(self) -> int:
        return len(self.order)

    @property
    def n_nodes(self) -> int:
        return len(self.count)

    def leaves(self):
        """Yield (node, face indices) for every leaf in depth-first order."""
        stack = [0]
        while stack:
            node = stack.pop()
            if self.count[node] > 0:
                s = self.start[node]
                yield node, self.order[s:s + self.count[node]]
            else:
                stack.append(int(self.right[node]))
                stack.append(int(self.left[node]))


def build_bvh(mesh: TriMesh) -> Bvh:
    if mesh.n_faces == 0:
        raise EmptyMesh("cannot build a BVH over zero faces")
    c = mesh.corners()
    tri_lo = c.min(axis=1)
    tri_hi = c.max(axis=1)
    centroid = c.mean(axis=1)
    scale = max(1.0, float(np.abs(c).max()))
    pad = 1e-9 * scale
    arrays = _build(tri_lo, tri_hi, centroid, LEAF_SIZE, pad)
    v0 = np.ascontiguousarray(c[:, 0])
    v1 = np.ascontiguousarray(c[:, 1])
    v2 = np.ascontiguousarray(c[:, 2])
    out = Bvh(*arrays, v0, v1, v2)
    for a in (out.node_lo, out.node_hi, out.left, out.right, out.start,
              out.count, out.order, v0, v1, v2):
        a.setflags(write=False)
    return out


# -- ray queries -------------------------------------------------------------

@njit(**_JIT)
def _ray_setup(d):
    kz = 0
    if abs(d[1]) > abs(d[kz]):
        kz = 1
    if abs(d[2]) > abs(d[kz]):
        kz = 2
    kx = (kz + 1) % 3
    ky = (kx + 1) % 3
    if d[kz] < 0.0:
        kx, ky = ky, kx
    return kx, ky, kz, d[kx] / d[kz], d[ky] / d[kz], 1.0 / d[kz]


@njit(**_JIT)
def _owns_edge(ex, ey, sign):
    # Top-left rule: of the two triangles sharing an edge, exactly one owns it.
    ex *= sign
    ey *= sign
    return ey > 0.0 or (ey == 0.0 and ex > 0.0)


@njit(**_JIT)
def _tri_hit(o, kx, ky, kz, sx, sy, sz, v0, v1, v2, f, t_min, t_max, tie_break=False):
    """Watertight ray/triangle test. Returns (hit, t, b0, b1, b2, on_edge).

    With ``tie_break`` a ray through a shared edge or vertex hits exactly one
    of the adjacent triangles; rejected edge hits still report ``on_edge``."""
    ax = v0[f, kx] - o[kx]
    ay = v0[f, ky] - o[ky]
    az = v0[f, kz] - o[kz]
    bx = v1[f, kx] - o[kx]
    by = v1[f, ky] - o[ky]
    bz = v1[f, kz] - o[kz]
    cx = v2[f, kx] - o[kx]
    cy = v2[f, ky] - o[ky]
    cz = v2[f, kz] - o[kz]
    Ax = ax - sx * az
    Ay = ay - sy * az
    Bx = bx - sx * bz
    By = by - sy * bz
    Cx = cx - sx * cz
    Cy = cy - sy * cz
    U = Cx * By - Cy * Bx
    V = Ax * Cy - Ay * Cx
    W = Bx * Ay - By * Ax
    if (U < 0.0 or V < 0.0 or W < 0.0) and (U > 0.0 or V > 0.0 or W > 0.0):
        return False, 0.0, 0.0, 0.0, 0.0, False
    det = U + V + W
    if det == 0.0:
        return False, 0.0, 0.0, 0.0, 0.0, False
    T = U * (sz * az) + V * (sz * bz) + W * (sz * cz)
    t = T / det
    if not (t > t_min and t < t_max):
        return False, 0.0, 0.0, 0.0, 0.0, False
    on_edge = U == 0.0 or V == 0.0 or W == 0.0
    if tie_break and on_edge:
        sign = 1.0 if det > 0.0 else -1.0
        if ((U == 0.0 and not _owns_edge(Cx - Bx, Cy - By, sign))
                or (V == 0.0 and not _owns_edge(Ax - Cx, Ay - Cy, sign))
                or (W == 0.0 and not _owns_edge(Bx - Ax, By - Ay, sign))):
            return False, 0.0, 0.0, 0.0, 0.0, True
    return True, t, U / det, V / det, W / det, on_edge


@njit(**_JIT)
def _ray_box(o, d, lo, hi, t_max):
    tn = -np.inf
    tf = np.inf
    for a in range(3):
        if d[a] == 0.0:
            if o[a] < lo[a] or o[a] > hi[a]:
                return False, 0.0
        else:
            inv = 1.0 / d[a]
            t1 = (lo[a] - o[a]) * inv
            t2 = (hi[a] - o[a]) * inv
            if t1 > t2:
                t1, t2 = t2, t1
            if t1 > tn:
                tn = t1
            if t2 < tf:
                tf = t2
    if tn > tf or tf < 0.0 or tn > t_max:
        return False, 0.0
    return True, tn


@njit(**_JIT)
def _closest_hit(node_lo, node_hi, left, right, start, count, order, v0, v1, v2,
                 o, d, t_min, t_max, stack):
    kx, ky, kz, sx, sy, sz = _ray_setup(d)
    best_t = t_max
    best_f = -1
    b0 = 0.0
    b1 = 0.0
    b2 = 0.0
    sp = 0
    stack[0] = 0
    sp = 1
    while sp > 0:
        sp -= 1
        node = stack[sp]
        ok, tn = _ray_box(o, d, node_lo[node], node_hi[node], best_t)
        if not ok:
            continue
        if count[node] > 0:
            for i in range(start[node], start[node] + count[node]):
                f = order[i]
                # t_max slightly above best so equal-t hits can still win the index tie.
                hit, t, u, v, w, _ = _tri_hit(o, kx, ky, kz, sx, sy, sz, v0, v1, v2, f,
                                              t_min, best_t * (1.0 + 1e-15) + 1e-300)
                if hit and (t < best_t or (t == best_t and (best_f < 0 or f < best_f))):
                    best_t = t
                    best_f = f
                    b0 = u
                    b1 = v
                    b2 = w
        else:
            stack[sp] = right[node]
            sp += 1
            stack[sp] = left[node]
            sp += 1
    return best_f, best_t, b0, b1, b2


@njit(**_JIT)
def _closest_hits(node_lo, node_hi, left, right, start, count, order, v0, v1, v2,
                  origins, dirs, t_min, t_max):
    n = origins.shape[0]
    faces = np.full(n, -1, np.int64)
    ts = np.full(n, np.inf)
    bary = np.zeros((n, 3))
    stack = np.empty(256, np.int64)
    for i in range(n):
        f, t, u, v, w = _closest_hit(node_lo, node_hi, left, right, start, count, order,
                                     v0, v1, v2, origins[i], dirs[i], t_min, t_max[i], stack)
        if f >= 0:
            faces[i] = f
            ts[i] = t
            bary[i, 0] = u
            bary[i, 1] = v
            bary[i, 2] = w
    return faces, ts, bary


@njit(**_JIT)
def _any_hits(node_lo, node_hi, left, right, start, count, order, v0, v1, v2,
              origins, dirs, t_min, t_max):
    n = origins.shape[0]
    out = np.zeros(n, np.bool_)
    stack = np.empty(256, np.int64)
    for i in range(n):
        o = origins[i]
        d = dirs[i]
        kx, ky, kz, sx, sy, sz = _ray_setup(d)
        sp = 1
        stack[0] = 0
        found = False
        while sp > 0 and not found:
            sp -= 1
            node = stack[sp]
            ok, tn = _ray_box(o, d, node_lo[node], node_hi[node], t_max[i])
            if not ok:
                continue
            if count[node] > 0:
                for k in range(start[node], start[node] + count[node]):
                    hit, t, u, v, w, _ = _tri_hit(o, kx, ky, kz, sx, sy, sz, v0, v1, v2,
                                                  order[k], t_min, t_max[i])
                    if hit:
                        found = True
                        break
            else:
                stack[sp] = right[node]
                sp += 1
                stack[sp] = left[node]
                sp += 1
        out[i] = found
    return out


@njit(**_JIT)
def _crossings(node_lo, node_hi, left, right, start, count, order, v0, v1, v2,
               origins, d):
    """Count ray crossings with t > 0 along a shared direction; flag rays
    that touch an edge or vertex (parity unreliable)."""
    n = origins.shape[0]
    counts = np.zeros(n, np.int64)
    ambiguous = np.zeros(n, np.bool_)
    kx, ky, kz, sx, sy, sz = _ray_setup(d)
    stack = np.empty(256, np.int64)
    for i in range(n):
        o = origins[i]
        sp = 1
        stack[0] = 0
        c = 0
        amb = False
        while sp > 0:
            sp -= 1
            node = stack[sp]
            ok, tn = _ray_box(o, d, node_lo[node], node_hi[node], np.inf)
            if not ok:
                continue
            if count[node] > 0:
                for k in range(start[node], start[node] + count[node]):
                    hit, t, u, v, w, edge = _tri_hit(o, kx, ky, kz, sx, sy, sz, v0, v1, v2,
                                                     order[k], 0.0, np.inf, True)
                    if hit:
                        c += 1
                    if edge:
                        amb = True
            else:
                stack[sp] = right[node]
                sp += 1
                stack[sp] = left[node]
                sp += 1
        counts[i] = c
        ambiguous[i] = amb
    return counts, ambiguous


# -- closest point -----------------------------------------------------------

@njit(**_JIT)
def _closest_on_segment(px, py, pz, ax, ay, az, bx, by, bz):
    ex = bx - ax
    ey = by - ay
    ez = bz - az
    den = ex * ex + ey * ey + ez * ez
    t = 0.0
    if den > 0.0:
        t = ((px - ax) * ex + (py - ay) * ey + (pz - az) * ez) / den
        t = min(1.0, max(0.0, t))
    return ax + t * ex, ay + t * ey, az + t * ez


@njit(**_JIT)
def _closest_on_triangle(px, py, pz, ax, ay, az, bx, by, bz, cx, cy, cz):
    # Ericson, Real-Time Collision Detection, 5.1.5
    abx = bx - ax
    aby = by - ay
    abz = bz - az
    acx = cx - ax
    acy = cy - ay
    acz = cz - az
    apx = px - ax
    apy = py - ay
    apz = pz - az
    d1 = abx * apx + aby * apy + abz * apz
    d2 = acx * apx + acy * apy + acz * apz
    if d1 <= 0.0 and d2 <= 0.0:
        return ax, ay, az
    bpx = px - bx
    bpy = py - by
    bpz = pz - bz
    d3 = abx * bpx + aby * bpy + abz * bpz
    d4 = acx * bpx + acy * bpy + acz * bpz
    if d3 >= 0.0 and d4 <= d3:
        return bx, by, bz
    vc = d1 * d4 - d3 * d2
    if vc <= 0.0 and d1 >= 0.0 and d3 <= 0.0 and d1 - d3 > 0.0:
        v = d1 / (d1 - d3)
        return ax + v * abx, ay + v * aby, az + v * abz
    cpx = px - cx
    cpy = py - cy
    cpz = pz - cz
    d5 = abx * cpx + aby * cpy + abz * cpz
    d6 = acx * cpx + acy * cpy + acz * cpz
    if d6 >= 0.0 and d5 <= d6:
        return cx, cy, cz
    vb = d5 * d2 - d1 * d6
    if vb <= 0.0 and d2 >= 0.0 and d6 <= 0.0 and d2 - d6 > 0.0:
        w = d2 / (d2 - d6)
        return ax + w * acx, ay + w * acy, az + w * acz
    va = d3 * d6 - d5 * d4
    if va <= 0.0 and d4 - d3 >= 0.0 and d5 - d6 >= 0.0 and (d4 - d3) + (d5 - d6) > 0.0:
        w = (d4 - d3) / ((d4 - d3) + (d5 - d6))
        return bx + w * (cx - bx), by + w * (cy - by), bz + w * (cz - bz)
    den = va + vb + vc
    if den <= 0.0:
        # degenerate triangle: best of the three edges
        qx, qy, qz = _closest_on_segment(px, py, pz, ax, ay, az, bx, by, bz)
        best = (px - qx) ** 2 + (py - qy) ** 2 + (pz - qz) ** 2
        rx, ry, rz = _closest_on_segment(px, py, pz, bx, by, bz, cx, cy, cz)
        dd = (px - rx) ** 2 + (py - ry) ** 2 + (pz - rz) ** 2
        if dd < best:
            best = dd
            qx, qy, qz = rx, ry, rz
        rx, ry, rz = _closest_on_segment(px, py, pz, cx, cy, cz, ax, ay, az)
        dd = (px - rx) ** 2 + (py - ry) ** 2 + (pz - rz) ** 2
        if dd < best:
            qx, qy, qz = rx, ry, rz
        return qx, qy, qz
    v = vb / den
    w = vc / den
    return ax + abx * v + acx * w, ay + aby * v + acy * w, az + abz * v + acz * w


@njit(**_JIT)
def _box_dist2(p, lo, hi):
    d = 0.0
    for a in range(3):
        if p[a] < lo[a]:
            d += (lo[a] - p[a]) ** 2
        elif p[a] > hi[a]:
            d += (p[a] - hi[a]) ** 2
    return d


@njit(**_JIT)
def _closest_points(node_lo, node_hi, left, right, start, count, order, v0, v1, v2, points):
    n = points.shape[0]
    dist = np.empty(n)
    faces = np.empty(n, np.int64)
    closest = np.empty((n, 3))
    stack = np.empty(256, np.int64)
    for i in range(n):
        p = points[i]
        best = np.inf
        bf = -1
        bx = 0.0
        by = 0.0
        bz = 0.0
        sp = 1
        stack[0] = 0
        while sp > 0:
            sp -= 1
            node = stack[sp]
            if _box_dist2(p, node_lo[node], node_hi[node]) > best:
                continue
            if count[node] > 0:
                for k in range(start[node], start[node] + count[node]):
                    f = order[k]
                    qx, qy, qz = _closest_on_triangle(
                        p[0], p[1], p[2], v0[f, 0], v0[f, 1], v0[f, 2],
                        v1[f, 0], v1[f, 1], v1[f, 2], v2[f, 0], v2[f, 1], v2[f, 2])
                    dx = p[0] - qx
                    dy = p[1] - qy
                    dz = p[2] - qz
                    dd = dx * dx + dy * dy + dz * dz
                    if dd < best or (dd == best and f < bf):
                        best = dd
                        bf = f
                        bx = qx
                        by = qy
                        bz = qz
            else:
                l = left[node]
                r = right[node]
                dl = _box_dist2(p, node_lo[l], node_hi[l])
                dr = _box_dist2(p, node_lo[r], node_hi[r])
                if dl <= dr:
                    stack[sp] = r
                    sp += 1
                    stack[sp] = l
                    sp += 1
                else:
                    stack[sp] = l
                    sp += 1
                    stack[sp] = r
                    sp += 1
        dist[i] = np.sqrt(best)
        faces[i] = bf
        closest[i, 0] = bx
        closest[i, 1] = by
        closest[i, 2] = bz
    return dist, faces, closest


# -- public wrappers ---------------------------------------------------------

class RayHit(NamedTuple):
    t: float
    face: int
    barycentric: tuple


def _args(bvh: Bvh):
    return (bvh.node_lo, bvh.node_hi, bvh.left, bvh.right, bvh.start, bvh.count,
            bvh.order, bvh.v0, bvh.v1, bvh.v2)


def _check(bvh: Bvh, mesh: Optional[TriMesh]):
    if mesh is not None and mesh.n_faces != bvh.n_faces:
        raise ValueError("bvh was built for a different mesh")


def ray_intersect(bvh: Bvh, mesh: Optional[TriMesh], origin, direction,
                  t_max: float = np.inf) -> Optional[RayHit]:
    """Nearest hit with t in (1e-6, t_max), or None. Equal-t hits resolve to
    the lowest face index."""
    _check(bvh, mesh)
    d = np.asarray(direction, dtype=np.float64)
    if abs(np.linalg.norm(d) - 1.0) > 1e-6:
        raise ValueError("direction must be a unit vector")
    if not t_max > 0:
        raise ValueError("t_max must be positive")
    faces, ts, bary = ray_intersect_many(
        bvh, np.asarray(origin, dtype=np.float64)[None], d[None], t_max)
    if faces[0] < 0:
        return None
    return RayHit(float(ts[0]), int(faces[0]), tuple(float(b) for b in bary[0]))


def ray_intersect_many(bvh: Bvh, origins, dirs, t_max=np.inf, t_min: float = RAY_T_MIN):
    """Vectorised nearest-hit query. Returns (faces, t, barycentrics); misses
    have face -1 and t = inf."""
    origins = np.ascontiguousarray(origins, dtype=np.float64).reshape(-1, 3)
    dirs = np.ascontiguousarray(np.broadcast_to(
        np.asarray(dirs, dtype=np.float64), origins.shape))
    tm = np.ascontiguousarray(np.broadcast_to(
        np.asarray(t_max, dtype=np.float64), (len(origins),)))
    return _closest_hits(*_args(bvh), origins, dirs, float(t_min), tm)


def occluded_many(bvh: Bvh, origins, dirs, t_max=np.inf, t_min: float = RAY_T_MIN):
    """True where the ray hits anything with t in (t_min, t_max)."""
    origins = np.ascontiguousarray(origins, dtype=np.float64).reshape(-1, 3)
    dirs = np.ascontiguousarray(np.broadcast_to(
        np.asarray(dirs, dtype=np.float64), origins.shape))
    tm = np.ascontiguousarray(np.broadcast_to(
        np.asarray(t_max, dtype=np.float64), (len(origins),)))
    return _any_hits(*_args(bvh), origins, dirs, float(t_min), tm)


def count_crossings(bvh: Bvh, origins, direction):
    """Number of surface crossings along ``direction`` and an ambiguity flag
    per origin (ray touched an edge or vertex)."""
    origins = np.ascontiguousarray(origins, dtype=np.float64).reshape(-1, 3)
    d = np.ascontiguousarray(direction, dtype=np.float64)
    return _crossings(*_args(bvh), origins, d)


def closest_points(bvh: Bvh, points):
    """Exact nearest surface point. Returns (distance, face, closest point)."""
    points = np.ascontiguousarray(points, dtype=np.float64).reshape(-1, 3)
    return _closest_points(*_args(bvh), points)
