"""Slow, independent reference implementations used as test oracles.

None of these import the library's kernels; they are written from the
textbook definitions with plain numpy loops.
"""

from __future__ import annotations

import math

import numpy as np


def moller_trumbore(orig, d, v0, v1, v2, t_min=1e-6, t_max=np.inf):
    """Nearest hit over all triangles, (face, t) or (-1, inf). Ties -> lowest face."""
    e1 = v1 - v0
    e2 = v2 - v0
    p = np.cross(d, e2)
    det = np.einsum("ij,ij->i", e1, p)
    ok = np.abs(det) > 1e-300
    inv = np.where(ok, 1.0 / np.where(ok, det, 1.0), 0.0)
    s = orig - v0
    u = np.einsum("ij,ij->i", s, p) * inv
    q = np.cross(s, e1)
    v = (q @ d) * inv
    t = np.einsum("ij,ij->i", e2, q) * inv
    hit = ok & (u >= 0) & (v >= 0) & (u + v <= 1) & (t > t_min) & (t < t_max)
    if not hit.any():
        return -1, np.inf
    tt = np.where(hit, t, np.inf)
    f = int(np.argmin(tt))
    return f, float(tt[f])


def _seg_dist2(p, a, b):
    ab = b - a
    den = np.einsum("ij,ij->i", ab, ab)
    t = np.where(den > 0, np.einsum("ij,ij->i", p - a, ab) / np.where(den > 0, den, 1.0), 0.0)
    t = np.clip(t, 0.0, 1.0)
    c = a + t[:, None] * ab
    return np.einsum("ij,ij->i", p - c, p - c)


def point_triangle_dist(p, v0, v1, v2):
    """Distance from one point to every triangle: plane projection when the
    foot lies inside, else the nearest of the three edge segments."""
    p = np.broadcast_to(np.asarray(p, dtype=np.float64), v0.shape)
    n = np.cross(v1 - v0, v2 - v0)
    nn = np.einsum("ij,ij->i", n, n)
    good = nn > 0
    sd = np.where(good, np.einsum("ij,ij->i", p - v0, n) / np.sqrt(np.where(good, nn, 1.0)), 0.0)
    nu = n / np.sqrt(np.where(good, nn, 1.0))[:, None]
    foot = p - sd[:, None] * nu
    # barycentric sign test of the foot point
    c0 = np.einsum("ij,ij->i", np.cross(v1 - v0, foot - v0), n)
    c1 = np.einsum("ij,ij->i", np.cross(v2 - v1, foot - v1), n)
    c2 = np.einsum("ij,ij->i", np.cross(v0 - v2, foot - v2), n)
    inside = good & (c0 >= 0) & (c1 >= 0) & (c2 >= 0)
    d2 = np.minimum(np.minimum(_seg_dist2(p, v0, v1), _seg_dist2(p, v1, v2)), _seg_dist2(p, v2, v0))
    d2 = np.where(inside, sd * sd, d2)
    return np.sqrt(d2)


def brute_unsigned_distance(mesh, points):
    c = mesh.vertices[mesh.faces]
    return np.array([point_triangle_dist(p, c[:, 0], c[:, 1], c[:, 2]).min() for p in points])


def fps_brute(points, target, start):
    """O(K^2) greedy: recompute every candidate's min distance from scratch."""
    pts = np.asarray(points, dtype=np.float64)
    chosen = [start]
    for _ in range(1, target):
        best, best_i = -1.0, -1
        for i in range(len(pts)):
            if i in chosen:
                continue
            d = min(float(np.sum((pts[i] - pts[j]) ** 2)) for j in chosen)
            if d > best:
                best, best_i = d, i
        chosen.append(best_i)
    return chosen


def nearest_brute(points, queries):
    """Lowest-index exact nearest neighbour for each query."""
    out = np.empty(len(queries), dtype=np.int64)
    for k, q in enumerate(queries):
        d2 = np.sum((points - q) ** 2, axis=1)
        out[k] = int(np.flatnonzero(d2 == d2.min())[0])
    return out


def greedy_cover_oracle(fixed_sets, candidate_sets, rounds):
    """Set-cover greedy on python sets; ties -> earliest candidate. Returns
    (picked candidate positions, gains)."""
    covered = set().union(*fixed_sets) if fixed_sets else set()
    remaining = list(range(len(candidate_sets)))
    picks, gains = [], []
    for _ in range(rounds):
        best, best_pos = -1, None
        for pos in remaining:
            g = len(candidate_sets[pos] - covered)
            if g > best:
                best, best_pos = g, pos
        picks.append(best_pos)
        gains.append(best)
        covered |= candidate_sets[best_pos]
        remaining.remove(best_pos)
    return picks, gains


def cap_fraction(cos_threshold):
    """Area fraction of a unit sphere whose normal is within arccos(c) of a direction."""
    return (1.0 - cos_threshold) / 2.0


def psnr(a, b, peak=1.0):
    mse = float(np.mean((np.asarray(a) - np.asarray(b)) ** 2))
    return math.inf if mse == 0 else 10.0 * math.log10(peak * peak / mse)


def point_in_triangle_2d(p, a, b, c):
    def cross(o, x, y):
        return (x[0] - o[0]) * (y[1] - o[1]) - (x[1] - o[1]) * (y[0] - o[0])
    d1, d2, d3 = cross(a, b, p), cross(b, c, p), cross(c, a, p)
    neg = d1 < 0 or d2 < 0 or d3 < 0
    pos = d1 > 0 or d2 > 0 or d3 > 0
    return not (neg and pos)


def euler_exponential_error(steps):
    """|e - (1 + 1/S)^S| for x' = x, x(0) = 1."""
    return abs(math.e - (1.0 + 1.0 / steps) ** steps)


def cube_edge_distance(p):
    """Distance from points to the nearest of the 12 edges of [0,1]^3."""
    best = np.full(len(p), np.inf)
    for axis in range(3):
        o = [a for a in range(3) if a != axis]
        for cy in (0.0, 1.0):
            for cz in (0.0, 1.0):
                q = np.stack([p[:, o[0]] - cy, p[:, o[1]] - cz], axis=1)
                along = np.clip(p[:, axis], 0, 1) - p[:, axis]
                best = np.minimum(best, np.sqrt((q ** 2).sum(1) + along ** 2))
    return best


def cube_edge_id(p):
    """Index 0..11 of the cube edge a point lies on (axis, two fixed coords)."""
    ids = np.full(len(p), -1)
    for axis in range(3):
        o = [a for a in range(3) if a != axis]
        for k, (cy, cz) in enumerate([(0, 0), (0, 1), (1, 0), (1, 1)]):
            on = (np.abs(p[:, o[0]] - cy) < 1e-9) & (np.abs(p[:, o[1]] - cz) < 1e-9)
            ids[on & (ids < 0)] = 4 * axis + k
    return ids


def checker(y, z, cells=8):
    return ((np.floor((y + 1) / 2 * cells) + np.floor((z + 1) / 2 * cells)) % 2)


def render_quad_checker(view, res):
    """Image of the quad's checkerboard through the view's pixel grid."""
    r, u, _ = view.basis()
    col, row = np.meshgrid(np.arange(res) + 0.0, np.arange(res) + 0.0)
    x = (col + 0.5) / res * 2 * view.half_width - view.half_width
    y = view.half_width - (row + 0.5) / res * 2 * view.half_width
    world = view.center() + x[..., None] * r + y[..., None] * u
    val = checker(world[..., 1], world[..., 2])
    return np.repeat(val[..., None], 3, axis=2)
