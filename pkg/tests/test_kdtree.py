import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import nearest_brute
from texgeo.lowpoly import KdTree, kd_nearest, kd_nearest_many


def test_query_equal_to_stored_point():
    pts = np.random.default_rng(0).random((200, 3))
    tree = KdTree(pts)
    for i in (0, 57, 199):
        assert kd_nearest(tree, pts[i]) == (i, 0.0)


def test_tie_goes_to_lower_index():
    pts = np.array([[1.0, 0, 0], [-1.0, 0, 0], [0, 1.0, 0]])
    assert kd_nearest(KdTree(pts), [0, 0, 0])[0] == 0
    assert kd_nearest(KdTree(pts[::-1].copy()), [0, 0, 0])[0] == 0


def test_duplicates_resolve_to_lowest_index():
    pts = np.repeat(np.random.default_rng(1).random((30, 3)), 4, axis=0)
    idx, d = kd_nearest_many(KdTree(pts), pts)
    assert np.array_equal(idx, np.arange(120) // 4 * 4)
    assert np.all(d == 0)


@pytest.mark.parametrize("seed", range(5))
def test_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    pts = rng.random((1000, 3))
    q = rng.random((1000, 3)) * 1.2 - 0.1
    idx, d = kd_nearest_many(KdTree(pts), q)
    assert np.array_equal(idx, nearest_brute(pts, q))
    np.testing.assert_allclose(d, np.linalg.norm(pts[idx] - q, axis=1), rtol=0, atol=0)


@given(st.integers(1, 300), st.integers(0, 2**32 - 1), st.booleans())
def test_matches_brute_force_any_size(n, seed, lattice):
    rng = np.random.default_rng(seed)
    pts = rng.integers(0, 4, size=(n, 3)).astype(float) if lattice else rng.normal(size=(n, 3))
    q = rng.integers(0, 4, size=(50, 3)) + 0.5 * rng.integers(0, 2, size=(50, 3)) if lattice \
        else rng.normal(size=(50, 3))
    idx, _ = KdTree(pts).nearest_many(np.asarray(q, float))
    assert np.array_equal(idx, nearest_brute(pts, np.asarray(q, float)))


def test_payload_and_empty():
    pts = np.eye(3)
    tree = KdTree(pts, payload=np.array([[1, 0, 0], [0, 1, 0], [0, 0, 1]], float))
    i, _ = tree.nearest([0.9, 0.1, 0])
    assert tree.payload[i].tolist() == [1, 0, 0]
    with pytest.raises(ValueError):
        KdTree(np.zeros((0, 3)))
