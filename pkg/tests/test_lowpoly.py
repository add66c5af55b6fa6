import numpy as np
import pytest

from texgeo.errors import MissingUvs, NonManifoldInput, TargetUnreachable
from texgeo.lowpoly import (per_face_chart_uvs, qem_decimate, rebake_lowpoly, transfer_texture,
                            vertex_quadrics)
from texgeo.lowpoly.qem import face_quadrics, optimal_position
from texgeo.mesh_core import TriMesh, build_bvh, rasterize_uv_atlas
from texgeo.mesh_core.primitives import box, icosphere, plane_grid, uv_sphere
from texgeo.sampling import sample_uniform
from texgeo.sdf import signed_distance_many
from texgeo.texture_bake import TextureMap, VertexColors, texture_to_vertex_colors


def test_vertex_quadrics_sum_face_planes():
    m = icosphere(1)
    q = vertex_quadrics(m.vertices, m.faces)
    for v in (0, 5, 20):
        want = np.zeros((4, 4))
        for tri in m.corners()[np.any(m.faces == v, axis=1)]:
            n = np.cross(tri[1] - tri[0], tri[2] - tri[0])
            n /= np.linalg.norm(n)
            p = np.append(n, -n @ tri[0])
            want += np.outer(p, p)
        np.testing.assert_allclose(q[v], want, atol=1e-12)
    assert np.allclose(face_quadrics(m.vertices, m.faces), np.swapaxes(face_quadrics(m.vertices, m.faces), 1, 2))


def test_singular_quadric_midpoint():
    q = np.zeros((4, 4))
    v, err = optimal_position(q, np.zeros(3), np.array([2.0, 0, 0]))
    assert v.tolist() == [1.0, 0, 0] and err == 0.0


def test_planar_grid_to_two_faces():
    g = plane_grid(10, 10)
    hist = []
    low = qem_decimate(g, 2, hist)
    assert low.n_faces == 2
    assert np.max(np.abs(low.vertices[:, 2])) < 1e-9
    assert low.is_manifold()
    assert all(e >= 0 for e, _, _ in hist)


def test_cube_identity_at_full_target():
    b = box()
    out = qem_decimate(b, 12)
    assert np.array_equal(out.vertices, b.vertices) and np.array_equal(out.faces, b.faces)


def test_cube_unreachable_reports_count():
    with pytest.raises(TargetUnreachable) as ei:
        qem_decimate(box(), 2)
    assert ei.value.achieved == 4 and ei.value.target == 2
    assert ei.value.mesh.n_faces == 4 and ei.value.mesh.is_watertight()


def test_icosphere_to_500():
    dense = icosphere(5)
    hist = []
    low = qem_decimate(dense, 500, hist)
    assert low.n_faces <= 500
    assert low.is_manifold() and low.is_watertight()
    pts = sample_uniform(dense, 10_000, 0).positions
    sd = signed_distance_many(build_bvh(low), low, pts)
    assert np.mean(np.abs(sd)) < 0.01
    errs = [e for e, _, _ in hist]
    assert min(errs) >= 0
    # the main pass pops collapses in non-decreasing error order
    assert all(a <= b + 1e-15 for a, b in zip(errs, errs[1:]))


def test_rejects_non_manifold_and_bad_target():
    m = TriMesh([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1]],
                [[0, 1, 2], [0, 1, 3], [0, 1, 4]])
    with pytest.raises(NonManifoldInput):
        qem_decimate(m, 1)
    with pytest.raises(ValueError):
        qem_decimate(box(), 0)


def test_no_flips_on_random_bumpy_sphere():
    s = icosphere(3)
    rng = np.random.default_rng(0)
    m = TriMesh(s.vertices * (1 + 0.05 * rng.random((len(s.vertices), 1))), s.faces)
    low = qem_decimate(m, 100)
    assert low.n_faces <= 100 and low.is_watertight()
    c = low.corners()
    n = np.cross(c[:, 1] - c[:, 0], c[:, 2] - c[:, 0])
    assert np.all(np.einsum("ij,ij->i", n, c.mean(axis=1)) > 0)


def _dense_textured(mesh, size, color_fn):
    at = rasterize_uv_atlas(mesh, size, size)
    rgb = np.zeros((size, size, 3))
    rgb[at.valid] = color_fn(at.position[at.valid])
    return at, TextureMap(size, size, rgb, at.valid)


def test_transfer_identity():
    dense = uv_sphere(32, 16)
    at, tex = _dense_textured(dense, 256, lambda p: (p + 1) / 2)
    vc = texture_to_vertex_colors(dense, at, tex)
    assert vc.textured.all()
    out = transfer_texture(dense, at, tex, dense)
    assert np.array_equal(out.colors, vc.colors)


def test_transfer_constant():
    dense = uv_sphere(32, 16)
    at, tex = _dense_textured(dense, 256, lambda p: np.full((len(p), 3), 0.4))
    low = qem_decimate(TriMesh(dense.vertices, dense.faces), 60)
    out = transfer_texture(dense, at, tex, low)
    np.testing.assert_allclose(out.colors, 0.4, atol=1e-12)


def _split_cube(n):
    """Cube whose six sides are separate n x n grids (no shared vertices)."""
    verts, faces, uvs = [], [], []
    g = plane_grid(n, n)
    for axis in range(3):
        for side in (0.0, 1.0):
            v = np.zeros_like(g.vertices)
            o = [a for a in range(3) if a != axis]
            v[:, o[0]], v[:, o[1]] = g.vertices[:, 0], g.vertices[:, 1]
            v[:, axis] = side
            f = g.faces if side else g.faces[:, ::-1]
            u = g.uvs if side else g.uvs[:, ::-1]
            tile = len(uvs)
            uvs.append((u + [tile % 3, tile // 3]) / [3, 2] * 0.98 + 0.01 / np.array([3, 2]))
            faces.append(f + sum(len(x) for x in verts))
            verts.append(v)
    return TriMesh(np.vstack(verts), np.vstack(faces), uvs=np.clip(np.vstack(uvs), 0, 1))


def test_transfer_face_colors_stay_pure():
    dense = _split_cube(6)
    palette = np.array([[1, 0, 0], [0, 1, 0], [0, 0, 1], [1, 1, 0], [0, 1, 1], [1, 0, 1]], float)
    at = rasterize_uv_atlas(dense, 384, 256)
    rgb = np.zeros((256, 384, 3))
    fid = at.face[at.valid] // (2 * 36)
    rgb[at.valid] = palette[fid]
    tex = TextureMap(384, 256, rgb, at.valid)
    low = qem_decimate(TriMesh(dense.vertices, dense.faces), 12)
    out = transfer_texture(dense, at, tex, low)
    for c in out.colors:
        assert any(np.array_equal(c, p) for p in palette)


def test_rebake_constant_and_barycenter():
    tri = TriMesh([[0, 0, 0], [1, 0, 0], [0, 1, 0]], [[0, 1, 2]])
    vc = VertexColors(np.eye(3), np.ones(3, bool))
    tex, low = rebake_lowpoly(tri, vc, 32)
    assert low.uvs is not None
    # corners at texel centers 0.5 and 30.5, so the barycenter is texel (10, 10)
    np.testing.assert_allclose(tex.rgb[10, 10], [1 / 3] * 3, atol=1e-6)
    s = icosphere(1)
    tex, _ = rebake_lowpoly(s, VertexColors(np.full((s.n_vertices, 3), 0.7), np.ones(s.n_vertices, bool)), 256)
    assert tex.covered.any()
    np.testing.assert_allclose(tex.rgb[tex.covered], 0.7, atol=1e-12)
    assert np.all(tex.rgb[~tex.covered] == 0)


def test_rebake_roundtrip():
    s = icosphere(1)
    colors = np.random.default_rng(0).random((s.n_vertices, 3))
    tex, low = rebake_lowpoly(s, VertexColors(colors, np.ones(s.n_vertices, bool)), 1024)
    at = rasterize_uv_atlas(low, 1024, 1024)
    back = texture_to_vertex_colors(low, at, tex)
    assert back.textured.all()
    assert np.max(np.abs(back.colors - colors)) < 0.02


def test_charts_do_not_overlap():
    s = icosphere(2)
    m = s.replace(uvs=per_face_chart_uvs(s, 512))
    at = rasterize_uv_atlas(m, 512, 512)
    counts = np.bincount(at.face[at.valid], minlength=s.n_faces)
    assert np.all(counts > 0)
    with pytest.raises(ValueError):
        per_face_chart_uvs(s, 16)


def test_rebake_without_uvs_or_fallback():
    s = icosphere(1)
    with pytest.raises(MissingUvs):
        rebake_lowpoly(s, VertexColors(np.zeros((s.n_vertices, 3)), np.ones(s.n_vertices, bool)), 64,
                       fallback=False)
