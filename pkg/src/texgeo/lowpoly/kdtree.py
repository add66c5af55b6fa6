"""Exact nearest-neighbor search over 3D points.

Median splits on the widest axis down to small buckets. Queries descend the
near side first and visit the far side whenever the splitting plane is no
farther than the current best, so equidistant points are all examined and
the lowest index wins.
"""

from __future__ import annotations

import numpy as np
from numba import njit

LEAF_SIZE = 8


@njit(cache=True)
def _build(pts, leaf_size):
    n = pts.shape[0]
    order = np.arange(n)
    cap = 2 * n + 1
    axis = np.full(cap, -1, np.int64)
    split = np.zeros(cap)
    left = np.full(cap, -1, np.int64)
    right = np.full(cap, -1, np.int64)
    start = np.zeros(cap, np.int64)
    stop = np.zeros(cap, np.int64)
    n_nodes = 1
    start[0] = 0
    stop[0] = n
    stack = [0]
    while len(stack) > 0:
        node = stack.pop()
        s, e = start[node], stop[node]
        if e - s <= leaf_size:
            continue
        best, ax = -1.0, 0
        for a in range(3):
            lo = np.inf
            hi = -np.inf
            for i in range(s, e):
                c = pts[order[i], a]
                lo = min(lo, c)
                hi = max(hi, c)
            if hi - lo > best:
                best, ax = hi - lo, a
        if best <= 0.0:
            continue
        seg = order[s:e].copy()
        keys = np.empty(e - s)
        for i in range(e - s):
            keys[i] = pts[seg[i], ax]
        srt = np.argsort(keys, kind="mergesort")
        for i in range(e - s):
            order[s + i] = seg[srt[i]]
        mid = (s + e) // 2
        axis[node] = ax
        split[node] = pts[order[mid], ax]
        l, r = n_nodes, n_nodes + 1
        n_nodes += 2
        left[node], right[node] = l, r
        start[l], stop[l] = s, mid
        start[r], stop[r] = mid, e
        stack.append(l)
        stack.append(r)
    return (order, axis[:n_nodes], split[:n_nodes], left[:n_nodes],
            right[:n_nodes], start[:n_nodes], stop[:n_nodes])


@njit(cache=True)
def _query(pts, order, axis, split, left, right, start, stop, q):
    best_d2 = np.inf
    best_i = -1
    stack = np.empty(128, np.int64)
    sd = np.empty(128)
    stack[0] = 0
    sd[0] = 0.0
    top = 1
    while top > 0:
        top -= 1
        node = stack[top]
        if sd[top] > best_d2:
            continue
        if axis[node] < 0:
            for i in range(start[node], stop[node]):
                p = order[i]
                dx = pts[p, 0] - q[0]
                dy = pts[p, 1] - q[1]
                dz = pts[p, 2] - q[2]
                d2 = dx * dx + dy * dy + dz * dz
                if d2 < best_d2 or (d2 == best_d2 and p < best_i):
                    best_d2 = d2
                    best_i = p
            continue
        diff = q[axis[node]] - split[node]
        if diff < 0:
            near, far = left[node], right[node]
        else:
            near, far = right[node], left[node]
        stack[top] = far
        sd[top] = diff * diff
        top += 1
        stack[top] = near
        sd[top] = 0.0
        top += 1
    return best_i, best_d2


@njit(cache=True)
def _query_many(pts, order, axis, split, left, right, start, stop, qs):
    m = qs.shape[0]
    idx = np.empty(m, np.int64)
    d2 = np.empty(m)
    for i in range(m):
        idx[i], d2[i] = _query(pts, order, axis, split, left, right, start, stop, qs[i])
    return idx, d2


class KdTree:
    """Static tree over ``points`` (n, 3); ``payload`` rides along unchanged."""

    def __init__(self, points, payload=None, leaf_size: int = LEAF_SIZE):
        pts = np.ascontiguousarray(points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise ValueError("points must be (n, 3)")
        if len(pts) == 0:
            raise ValueError("tree needs at least one point")
        if not np.all(np.isfinite(pts)):
            raise ValueError("points must be finite")
        self.points = pts
        self.payload = None if payload is None else np.asarray(payload)
        self._nodes = _build(pts, int(leaf_size))

    def __len__(self):
        return len(self.points)

    def nearest(self, query):
        """(index, distance) of the closest stored point."""
        q = np.ascontiguousarray(query, dtype=np.float64).reshape(3)
        i, d2 = _query(self.points, *self._nodes, q)
        return int(i), float(np.sqrt(d2))

    def nearest_many(self, queries):
        qs = np.ascontiguousarray(queries, dtype=np.float64).reshape(-1, 3)
        idx, d2 = _query_many(self.points, *self._nodes, qs)
        return idx, np.sqrt(d2)


def kd_nearest(tree: KdTree, query):
    return tree.nearest(query)


def kd_nearest_many(tree: KdTree, queries):
    return tree.nearest_many(queries)
