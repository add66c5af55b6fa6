import numpy as np
import pytest

from oracles import brute_unsigned_distance, moller_trumbore
from texgeo.mesh_core import TriMesh, build_bvh, closest_points, count_crossings, ray_intersect
from texgeo.mesh_core.bvh import LEAF_SIZE, ray_intersect_many
from texgeo.mesh_core.primitives import box, icosphere, plane_grid, uv_sphere


def test_single_triangle_single_leaf():
    b = build_bvh(TriMesh(np.eye(3), [[0, 1, 2]]))
    assert b.n_nodes == 1
    assert [f.tolist() for _, f in b.leaves()] == [[0]]


def _check_structure(mesh):
    b = build_bvh(mesh)
    seen = np.concatenate([f for _, f in b.leaves()])
    assert sorted(seen.tolist()) == list(range(mesh.n_faces))
    c = mesh.corners()
    for node, faces in b.leaves():
        assert len(faces) <= LEAF_SIZE
        assert np.all(c[faces].min(axis=1) >= b.node_lo[node])
        assert np.all(c[faces].max(axis=1) <= b.node_hi[node])
    for node in range(b.n_nodes):
        if b.count[node] == 0:
            for ch in (b.left[node], b.right[node]):
                assert np.all(b.node_lo[ch] >= b.node_lo[node])
                assert np.all(b.node_hi[ch] <= b.node_hi[node])


def test_cube_structure():
    _check_structure(box())


def test_sphere_structure(sphere):
    _check_structure(sphere)


def test_ray_hits_sphere_top(sphere):
    h = ray_intersect(build_bvh(sphere), sphere, (0, 0, 5), (0, 0, -1))
    assert h is not None and abs(h.t - 4.0) < 0.01
    assert abs(sum(h.barycentric) - 1.0) < 1e-12


def test_ray_miss(sphere):
    assert ray_intersect(build_bvh(sphere), sphere, (0, 0, 5), (0, 0, 1)) is None


def test_ray_validates():
    m = box()
    b = build_bvh(m)
    with pytest.raises(ValueError):
        ray_intersect(b, m, (0, 0, 5), (0, 0, -2))
    with pytest.raises(ValueError):
        ray_intersect(b, m, (0, 0, 5), (0, 0, -1), t_max=0)


def test_t_max_respected(sphere):
    assert ray_intersect(build_bvh(sphere), sphere, (0, 0, 5), (0, 0, -1), t_max=3.9) is None


@pytest.mark.parametrize("seed", range(3))
def test_rays_match_brute_force(seed):
    rng = np.random.default_rng(seed)
    n = 300
    v = rng.normal(size=(3 * n, 3))
    m = TriMesh(v, np.arange(3 * n).reshape(n, 3))
    b = build_bvh(m)
    o = rng.normal(size=(1000, 3)) * 2
    d = rng.normal(size=(1000, 3))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    faces, ts, _ = ray_intersect_many(b, o, d)
    c = m.corners()
    for i in range(1000):
        f, t = moller_trumbore(o[i], d[i], c[:, 0], c[:, 1], c[:, 2])
        assert faces[i] == f
        if f >= 0:
            assert abs(ts[i] - t) < 1e-9


def test_shared_edges_do_not_leak():
    g = plane_grid(6, 6)
    b = build_bvh(g)
    rng = np.random.default_rng(1)
    # points on interior grid lines and on cell diagonals
    pts = []
    for _ in range(1000):
        kind = rng.integers(3)
        if kind == 0:
            pts.append((rng.integers(1, 6) / 6.0, rng.uniform(0.01, 0.99), 0.0))
        elif kind == 1:
            pts.append((rng.uniform(0.01, 0.99), rng.integers(1, 6) / 6.0, 0.0))
        else:
            ci, cj = rng.integers(0, 6, size=2)
            s = rng.random()
            pts.append(((ci + s) / 6.0, (cj + s) / 6.0, 0.0))
    pts = np.array(pts)
    d = rng.normal(size=(1000, 3))
    d[:, 2] = -np.abs(d[:, 2]) - 0.2
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    origins = pts - 2.0 * d
    counts = np.array([count_crossings(b, origins[i:i + 1], d[i])[0][0] for i in range(1000)])
    assert np.all(counts == 1)
    faces, _, _ = ray_intersect_many(b, origins, d)
    assert np.all(faces >= 0)


def test_closest_points_match_brute_force():
    m = uv_sphere(100, 50)
    assert m.n_faces >= 9000
    rng = np.random.default_rng(2)
    pts = rng.uniform(-1.5, 1.5, size=(100, 3))
    d, f, c = closest_points(build_bvh(m), pts)
    np.testing.assert_allclose(d, brute_unsigned_distance(m, pts), atol=1e-12)
    np.testing.assert_allclose(np.linalg.norm(c - pts, axis=1), d, atol=1e-12)
