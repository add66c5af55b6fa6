import numpy as np
import pytest

from texgeo.errors import NoOccupiedSamples
from texgeo.mesh_core import TriMesh
from texgeo.mesh_core.primitives import box, icosphere
from texgeo.sdf import AnalyticSphere, grid_from_function, marching_cubes, surface_iou, volume_iou


def _sphere_mesh(res, r=0.5):
    grid = grid_from_function(lambda p: np.linalg.norm(p, axis=1) - r, res)
    return marching_cubes(grid)


def test_identical_meshes():
    m = icosphere(3)
    assert volume_iou(m, m, 20_000, 0) == 1.0
    assert surface_iou(m, m, 0.02, 5000, 0) == 1.0


def test_offset_cubes_one_third():
    a = box()
    b = box((0.5, 0, 0), (1.5, 1, 1))
    assert abs(volume_iou(a, b, 200_000, 0) - 1 / 3) <= 0.02


def test_disjoint():
    assert volume_iou(box(), box((2, 0, 0), (3, 1, 1)), 10_000, 0) == 0.0


def test_no_occupied_samples():
    a = AnalyticSphere((0, 0, 0), 1e-3)
    b = AnalyticSphere((100, 100, 100), 1e-3)
    with pytest.raises(NoOccupiedSamples):
        volume_iou(a, b, 100, 0)


def test_band_disjoint_spheres():
    band = 0.01
    a = icosphere(4, 0.5)
    b = icosphere(4, 0.5 + 2 * band)
    # tessellation moves each surface inward by up to ~1e-3, so allow a sliver
    assert surface_iou(a, b, band, 50_000, 0) < 0.1
    assert surface_iou(a, b, band, 50_000, 0) < surface_iou(a, icosphere(4, 0.5 + band), band, 50_000, 0)


def test_surface_iou_symmetric():
    a = icosphere(3, 0.5)
    b = TriMesh(icosphere(3, 0.5).vertices + [0.05, 0, 0], icosphere(3).faces)
    ab = surface_iou(a, b, 0.02, 100_000, 0)
    ba = surface_iou(b, a, 0.02, 100_000, 0)
    assert 0 < ab < 1
    assert abs(ab - ba) <= 0.01


def test_roundtrip_improves_with_resolution():
    ref = AnalyticSphere(radius=0.5)
    scores = {}
    for res in (32, 64, 128):
        scores[res] = volume_iou(_sphere_mesh(res), ref, 200_000, 0)
        assert scores[res] >= 1 - 2 / res
    assert scores[32] < scores[64] < scores[128]


def test_seeded_metrics_are_reproducible():
    a, b = box(), box((0.3, 0.1, 0), (1.3, 1.1, 1))
    assert volume_iou(a, b, 5000, 9) == volume_iou(a, b, 5000, 9)
    assert surface_iou(a, b, 0.05, 2000, 9) == surface_iou(a, b, 0.05, 2000, 9)
