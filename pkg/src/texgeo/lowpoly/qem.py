"""Quadric-error edge-collapse decimation.

Vertex quadrics start as the sum of the plane quadrics of incident faces
(unweighted, no boundary constraints). Edges sit in a heap keyed by
(error, a, b); entries go stale when either endpoint changes and are
skipped on pop. A collapse is legal when it keeps the surface manifold
(link condition, with a virtual vertex closing each boundary loop) and no
surviving face flips or degenerates.
"""

from __future__ import annotations

import heapq

import numpy as np

from ..errors import NonManifoldInput, TargetUnreachable
from ..mesh_core.mesh import TriMesh

SINGULAR_DET = 1e-12


def face_quadrics(vertices: np.ndarray, faces: np.ndarray) -> np.ndarray:
    """(F, 4, 4) plane quadrics p p^T with p = (n, -n.v0); degenerate faces give 0."""
    c = vertices[faces]
    n = np.cross(c[:, 1] - c[:, 0], c[:, 2] - c[:, 0])
    ln = np.linalg.norm(n, axis=1)
    ok = ln > 0
    n[ok] /= ln[ok, None]
    n[~ok] = 0.0
    p = np.concatenate([n, -np.einsum("ij,ij->i", n, c[:, 0])[:, None]], axis=1)
    return p[:, :, None] * p[:, None, :]


def vertex_quadrics(vertices: np.ndarray, faces: np.ndarray) -> np.ndarray:
    kf = face_quadrics(vertices, faces)
    q = np.zeros((len(vertices), 4, 4))
    for k in range(3):
        np.add.at(q, faces[:, k], kf)
    return q


def optimal_position(q: np.ndarray, va: np.ndarray, vb: np.ndarray):
    """Minimizer of v^T Q v, or the midpoint when the 3x3 system is singular."""
    a = q[:3, :3]
    if abs(np.linalg.det(a)) < SINGULAR_DET:
        v = 0.5 * (va + vb)
    else:
        v = np.linalg.solve(a, -q[:3, 3])
    h = np.append(v, 1.0)
    return v, max(float(h @ q @ h), 0.0)


class _State:
    def __init__(self, mesh: TriMesh):
        self.v = mesh.vertices.copy()
        self.f = mesh.faces.copy()
        self.q = vertex_quadrics(self.v, self.f)
        self.face_alive = np.ones(len(self.f), dtype=bool)
        self.vert_faces = [set() for _ in range(len(self.v))]
        for fi, tri in enumerate(self.f):
            for x in tri:
                self.vert_faces[x].add(fi)
        self.version = np.zeros(len(self.v), dtype=np.int64)
        self.n_faces = len(self.f)
        self.scale = max(mesh.diagonal(), 1e-300)

    def neighbors(self, a):
        out = set()
        for fi in self.vert_faces[a]:
            out.update(self.f[fi].tolist())
        out.discard(a)
        return out

    def edge_faces(self, a, b):
        return [fi for fi in self.vert_faces[a] if b in self.f[fi]]

    def is_boundary_vertex(self, a):
        for n in self.neighbors(a):
            if len(self.edge_faces(a, n)) == 1:
                return True
        return False

    def candidate(self, a, b):
        q = self.q[a] + self.q[b]
        v, err = optimal_position(q, self.v[a], self.v[b])
        return err, v

    def legal(self, a, b, pos):
        shared = self.edge_faces(a, b)
        opp = {int(x) for fi in shared for x in self.f[fi] if x != a and x != b}
        na, nb = self.neighbors(a), self.neighbors(b)
        if na & nb != opp:
            return False
        # A tetrahedron passes the link test but would fold into a double-sided pair.
        if len((na | nb) - {a, b}) <= len(opp):
            return False
        if len(shared) == 2 and self.is_boundary_vertex(a) and self.is_boundary_vertex(b):
            return False
        tol = 1e-12 * self.scale * self.scale
        for x, y in ((a, b), (b, a)):
            for fi in self.vert_faces[x]:
                if y in self.f[fi]:
                    continue
                c = self.v[self.f[fi]]
                old = np.cross(c[1] - c[0], c[2] - c[0])
                c = c.copy()
                c[list(self.f[fi]).index(x)] = pos
                new = np.cross(c[1] - c[0], c[2] - c[0])
                if np.linalg.norm(new) <= tol or float(old @ new) < 0.0:
                    return False
        return True

    def collapse(self, a, b, pos):
        """Merge b into a at ``pos``; returns the number of faces removed."""
        removed = 0
        for fi in list(self.vert_faces[b]):
            tri = self.f[fi]
            if a in tri:
                self.face_alive[fi] = False
                for x in tri:
                    self.vert_faces[x].discard(fi)
                removed += 1
            else:
                tri[tri == b] = a
                self.vert_faces[a].add(fi)
        self.vert_faces[b] = set()
        self.v[a] = pos
        self.q[a] = self.q[a] + self.q[b]
        self.version[a] += 1
        self.version[b] += 1
        self.n_faces -= removed
        return removed


def _check_manifold(mesh: TriMesh):
    if not mesh.is_manifold():
        raise NonManifoldInput("an edge is shared by more than two faces")


def qem_decimate(mesh: TriMesh, target_faces: int, history: list | None = None) -> TriMesh:
    """Collapse minimum-error edges until at most ``target_faces`` remain.

    Collapses that would jump below the target are postponed while any
    other legal collapse exists, so the target is hit exactly when the
    topology allows it. ``history`` (if given) receives ``(error, a, b)``
    per executed collapse. Output drops UVs and vertex normals.
    Raises TargetUnreachable (carrying the partial mesh) if no legal
    collapse remains above the target.
    """
    target_faces = int(target_faces)
    if target_faces < 1:
        raise ValueError("target_faces must be >= 1")
    _check_manifold(mesh)
    if mesh.n_faces <= target_faces:
        return mesh
    st = _State(mesh)
    heap = []

    def push(a, b):
        if a > b:
            a, b = b, a
        err, _ = st.candidate(a, b)
        heapq.heappush(heap, (err, a, b, int(st.version[a]), int(st.version[b])))

    edges = set()
    for tri in st.f:
        for k in range(3):
            x, y = int(tri[k]), int(tri[(k + 1) % 3])
            edges.add((min(x, y), max(x, y)))
    for a, b in sorted(edges):
        push(a, b)

    # Illegal and overshooting collapses wait here. When the heap runs dry
    # they are retried if anything changed since the last retry; overshoot
    # is allowed only once nothing else can make progress.
    deferred = []
    progress = False
    allow_overshoot = False
    while st.n_faces > target_faces:
        if not heap:
            heap = [it for it in deferred
                    if st.version[it[1]] == it[3] and st.version[it[2]] == it[4]]
            deferred = []
            if not heap:
                break
            if not progress:
                if allow_overshoot:
                    break
                allow_overshoot = True
            progress = False
            heapq.heapify(heap)
            continue
        item = heapq.heappop(heap)
        err, a, b, va, vb = item
        if st.version[a] != va or st.version[b] != vb:
            continue
        _, pos = st.candidate(a, b)
        if not st.legal(a, b, pos):
            deferred.append(item)
            continue
        if not allow_overshoot and st.n_faces - len(st.edge_faces(a, b)) < target_faces:
            deferred.append(item)
            continue
        st.collapse(a, b, pos)
        progress = True
        if history is not None:
            history.append((err, a, b))
        for n in sorted(st.neighbors(a)):
            push(a, n)

    out = _compact(st)
    if out.n_faces > target_faces:
        raise TargetUnreachable(out.n_faces, target_faces, out)
    return out


def _compact(st: _State) -> TriMesh:
    faces = st.f[st.face_alive]
    used = np.unique(faces)
    remap = np.full(len(st.v), -1, dtype=np.int64)
    remap[used] = np.arange(len(used))
    return TriMesh(st.v[used], remap[faces])
