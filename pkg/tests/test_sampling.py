import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from oracles import cube_edge_distance, cube_edge_id, fps_brute
from texgeo.errors import TargetExceedsInput, ZeroArea
from texgeo.mesh_core import TriMesh
from texgeo.mesh_core.primitives import box, icosphere, plane_grid
from texgeo.sampling import (build_point_query, detect_sharp_edges, farthest_point_sampling,
                             sample_importance, sample_uniform)


def test_points_inside_single_triangle():
    m = TriMesh([[0, 0, 0], [2, 0, 0], [0, 1, 0]], [[0, 1, 2]])
    pc = sample_uniform(m, 1000, 0)
    x, y = pc.positions[:, 0], pc.positions[:, 1]
    assert np.all(x >= -1e-12) and np.all(y >= -1e-12) and np.all(x / 2 + y <= 1 + 1e-12)
    np.testing.assert_allclose(pc.normals, [[0, 0, 1]] * 1000)


def test_area_ratio_9_to_1():
    m = TriMesh([[0, 0, 0], [3, 0, 0], [0, 3, 0], [10, 0, 0], [11, 0, 0], [10, 1, 0]],
                [[0, 1, 2], [3, 4, 5]])
    pc = sample_uniform(m, 100_000, 3)
    n_big = np.count_nonzero(pc.positions[:, 0] < 5)
    assert abs(n_big - 90_000) <= 1000


def test_chi_square_on_ten_faces():
    rng = np.random.default_rng(5)
    v = rng.normal(size=(30, 3))
    m = TriMesh(v, np.arange(30).reshape(10, 3))
    pc = sample_uniform(m, 100_000, 11)
    # each point goes to the triangle it lies on (distance 0 up to rounding)
    from oracles import point_triangle_dist
    c = m.corners()
    n = len(pc.positions)
    d = np.stack([point_triangle_dist(pc.positions, *(np.broadcast_to(c[f, k], (n, 3)) for k in range(3)))
                  for f in range(10)], axis=1)
    face = np.argmin(d, axis=1)
    assert np.max(d.min(axis=1)) < 1e-9
    counts = np.bincount(face, minlength=10)
    expected = m.face_areas() / m.face_areas().sum() * len(face)
    assert stats.chisquare(counts, expected).pvalue > 0.01


def test_uniform_deterministic():
    m = icosphere(2)
    a, b = sample_uniform(m, 500, 42), sample_uniform(m, 500, 42)
    assert np.array_equal(a.positions, b.positions) and np.array_equal(a.normals, b.normals)


def test_zero_area():
    with pytest.raises(ZeroArea):
        sample_uniform(TriMesh(np.zeros((3, 3)), [[0, 1, 2]]), 10, 0)


def test_cube_sharp_edges():
    s = detect_sharp_edges(box(), 30)
    assert len(s) == 12
    np.testing.assert_allclose(s.angles, 90.0)
    assert not s.boundary.any()
    assert len(detect_sharp_edges(box(), 91)) == 0


def test_plane_sharp_edges_are_boundary():
    g = plane_grid(4, 3)
    s = detect_sharp_edges(g, 30)
    assert s.boundary.all()
    assert len(s) == 2 * (4 + 3)


def test_threshold_range():
    with pytest.raises(ValueError):
        detect_sharp_edges(box(), 180)


def test_cube_importance_on_edges_uniform_per_edge():
    pc = sample_importance(box(), 12_000, 0)
    assert not pc.used_fallback
    assert np.max(cube_edge_distance(pc.positions)) <= 1e-9
    ids = cube_edge_id(pc.positions)
    assert np.all(ids >= 0)
    counts = np.bincount(ids, minlength=12)
    assert np.all(np.abs(counts - 1000) <= 100), counts
    np.testing.assert_allclose(np.linalg.norm(pc.normals, axis=1), 1.0, atol=1e-12)


def test_importance_band_fraction_vs_uniform():
    imp = sample_importance(box(), 5000, 1)
    uni = sample_uniform(box(), 20_000, 1)
    assert np.mean(cube_edge_distance(imp.positions) <= 0.02) == 1.0
    # each face loses a border strip of width 0.02 on all four sides
    band = 1 - (1 - 2 * 0.02) ** 2
    assert abs(np.mean(cube_edge_distance(uni.positions) <= 0.02) - band) < 0.01


def test_importance_fallback_on_sphere():
    pc = sample_importance(icosphere(3), 100, 0)
    assert pc.used_fallback and len(pc) == 100


def test_fps_collinear_tie():
    pts = np.stack([np.arange(10.0), np.zeros(10), np.zeros(10)], axis=1)
    assert farthest_point_sampling(pts, 3, start=0).tolist() == [0, 9, 4]


def test_fps_full_permutation():
    pts = np.random.default_rng(0).random((50, 3))
    assert sorted(farthest_point_sampling(pts, 50, seed=3).tolist()) == list(range(50))


def test_fps_target_exceeds():
    with pytest.raises(TargetExceedsInput):
        farthest_point_sampling(np.zeros((3, 3)), 4, seed=0)


@pytest.mark.parametrize("seed", range(5))
def test_fps_matches_brute(seed):
    rng = np.random.default_rng(seed)
    k = int(rng.integers(2, 120))
    pts = rng.integers(0, 5, size=(k, 3)).astype(float)  # lattice points force ties
    out = farthest_point_sampling(pts, k // 2 + 1, seed=seed)
    assert out.tolist() == fps_brute(pts, k // 2 + 1, int(out[0]))


@given(st.integers(0, 2**32 - 1), st.integers(2, 60))
def test_fps_prefix_property(seed, k):
    pts = np.random.default_rng(seed).random((k, 3))
    out = farthest_point_sampling(pts, k, seed=seed)
    for n in range(1, k):
        d = ((pts[:, None] - pts[out[:n]][None]) ** 2).sum(-1).min(axis=1)
        rest = np.setdiff1d(np.arange(k), out[:n])
        assert d[out[n]] >= d[rest].max()


def test_point_query_cube():
    cube = box()
    pu = sample_uniform(cube, 8000, 0)
    pi = sample_importance(cube, 8000, 1)
    before = pu.positions.copy(), pi.positions.copy()
    q = build_point_query(pu, pi, 512, 512, 2)
    assert q.combined.shape == (1024, 3)
    assert np.array_equal(q.combined[:512], q.uniform_query)
    assert np.max(cube_edge_distance(q.importance_query)) <= 1e-9
    assert np.array_equal(pu.positions, before[0]) and np.array_equal(pi.positions, before[1])
    assert np.array_equal(pu.positions[q.uniform_index], q.uniform_query)


def test_point_query_no_importance():
    pu = sample_uniform(box(), 100, 0)
    q = build_point_query(pu, sample_importance(box(), 10, 0), 20, 0, 0)
    assert np.array_equal(q.combined, q.uniform_query)
