import numpy as np
import pytest
from scipy.spatial import cKDTree

from texgeo.errors import EmptySurface
from texgeo.sdf import grid_from_function, marching_cubes


def sphere_field(r=0.5, c=(0.0, 0.0, 0.0)):
    return lambda p: np.linalg.norm(p - np.asarray(c), axis=1) - r


def test_sphere_vertices_near_radius():
    grid = grid_from_function(sphere_field(), 64)
    m = marching_cubes(grid)
    r = np.linalg.norm(m.vertices, axis=1)
    assert np.all(np.abs(r - 0.5) <= grid.spacing)


def test_vertices_on_cell_edges():
    grid = grid_from_function(sphere_field(0.37, (0.05, -0.1, 0.02)), 24)
    m = marching_cubes(grid)
    lat = (m.vertices - grid.origin) / grid.spacing
    on_lattice = np.abs(lat - np.round(lat)) < 1e-9
    # exactly two coordinates sit on lattice lines, or all three at a corner hit
    assert np.all(on_lattice.sum(axis=1) >= 2)


def test_closed_and_outward():
    grid = grid_from_function(sphere_field(0.6, (0.1, 0, 0)), 40)
    m = marching_cubes(grid)
    assert m.is_watertight()
    c = m.corners()
    n = np.cross(c[:, 1] - c[:, 0], c[:, 2] - c[:, 0])
    out = c.mean(axis=1) - [0.1, 0, 0]
    assert np.all(np.einsum("ij,ij->i", n, out) > 0)
    # welded: no duplicate positions
    assert len(np.unique(np.round(m.vertices, 12), axis=0)) == m.n_vertices


def test_all_positive_grid():
    grid = grid_from_function(lambda p: np.ones(len(p)), 8)
    with pytest.raises(EmptySurface):
        marching_cubes(grid)


@pytest.mark.parametrize("axis", [0, 1, 2])
def test_mirror_symmetry(axis):
    rng = np.random.default_rng(axis)
    centers = rng.uniform(-0.4, 0.4, size=(3, 3))

    def field(p):
        return np.min([np.linalg.norm(p - c, axis=1) - 0.3 for c in centers], axis=0)

    grid = grid_from_function(field, 21)
    m = marching_cubes(grid)
    mirrored = grid.values.copy()
    mirrored = np.flip(mirrored, axis=axis)
    from texgeo.sdf import SdfGrid
    mm = marching_cubes(SdfGrid(grid.dims, grid.origin, grid.spacing, mirrored))
    want = m.vertices.copy()
    want[:, axis] = -want[:, axis]
    assert mm.n_vertices == m.n_vertices and mm.n_faces == m.n_faces
    d, _ = cKDTree(want).query(mm.vertices)
    assert np.max(d) < 1e-9
