"""Multi-view texture baking into a UV atlas, and propagation inpainting.

Image conventions: view images are (H, W, 3) floats in [0, 1] with row 0 at
the top, matching :meth:`Viewpoint.project`. Texture arrays are indexed like
the atlas (row 0 at v = 0); PNG files store them flipped so the image's top
row is v = 1.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import MissingUvs, NoSeedTexels
from .mesh_core.atlas import UvAtlas
from .mesh_core.bvh import Bvh, build_bvh
from .mesh_core.mesh import TriMesh
from .view_select import COS_THRESHOLD, Viewpoint, uv_cover

WEIGHT_EXPONENT = 4
INPAINT_EPS = 1e-8
# texel units; beyond this a vertex is left to color propagation
VERTEX_FALLBACK_RADIUS = 3.0


@dataclass(frozen=True, eq=False)
class MultiViewImages:
    views: tuple
    images: tuple

    def __post_init__(self):
        views = tuple(self.views)
        imgs = tuple(np.asarray(im, dtype=np.float64) for im in self.images)
        if len(views) != len(imgs):
            raise ValueError("one image per view is required")
        if not views:
            raise ValueError("at least one view is required")
        shape = imgs[0].shape
        if len(shape) != 3 or shape[2] != 3:
            raise ValueError("images must be (H, W, 3)")
        for im in imgs:
            if im.shape != shape:
                raise ValueError("all view images must share one resolution")
            if not np.all(np.isfinite(im)) or im.min() < 0.0 or im.max() > 1.0:
                raise ValueError("image channels must lie in [0, 1]")
        object.__setattr__(self, "views", views)
        object.__setattr__(self, "images", imgs)

    def __len__(self):
        return len(self.views)

    @property
    def resolution(self):
        h, w = self.images[0].shape[:2]
        return w, h


@dataclass(frozen=True, eq=False)
class TextureMap:
    width: int
    height: int
    rgb: np.ndarray       # (H, W, 3), atlas row order
    covered: np.ndarray   # (H, W) bool

    def __post_init__(self):
        rgb = np.asarray(self.rgb, dtype=np.float64)
        cov = np.asarray(self.covered, dtype=bool)
        if rgb.shape != (self.height, self.width, 3) or cov.shape != (self.height, self.width):
            raise ValueError("texture arrays do not match width/height")
        if not np.all(np.isfinite(rgb)):
            raise ValueError("texture colors must be finite")
        object.__setattr__(self, "rgb", np.clip(rgb, 0.0, 1.0))
        object.__setattr__(self, "covered", cov)

    @property
    def coverage(self) -> float:
        return float(self.covered.mean())


@dataclass(frozen=True, eq=False)
class VertexColors:
    colors: np.ndarray    # (V, 3)
    textured: np.ndarray  # (V,) bool

    def __len__(self):
        return len(self.colors)


def _bilinear(image: np.ndarray, col: np.ndarray, row: np.ndarray) -> np.ndarray:
    h, w = image.shape[:2]
    c0 = np.floor(col)
    r0 = np.floor(row)
    fc = (col - c0)[:, None]
    fr = (row - r0)[:, None]
    c0 = c0.astype(np.int64)
    r0 = r0.astype(np.int64)
    ca, cb = np.clip(c0, 0, w - 1), np.clip(c0 + 1, 0, w - 1)
    ra, rb = np.clip(r0, 0, h - 1), np.clip(r0 + 1, 0, h - 1)
    top = image[ra, ca] * (1 - fc) + image[ra, cb] * fc
    bot = image[rb, ca] * (1 - fc) + image[rb, cb] * fc
    return top * (1 - fr) + bot * fr


def _view_order(mv: MultiViewImages):
    return sorted(range(len(mv)), key=lambda i: (mv.views[i].key(), mv.images[i].tobytes()))


def bake(atlas: UvAtlas, mesh: TriMesh, bvh: Bvh | None, views: MultiViewImages,
         cos_threshold: float = COS_THRESHOLD, k: float = WEIGHT_EXPONENT) -> TextureMap:
    """Fuse view images into the atlas with weights cos(theta)**k.

    A view contributes to a texel only if the texel passes its coverage test
    and projects inside the image frame. Views are accumulated in a fixed
    order (by view key) so the result does not depend on the input order.
    """
    bvh = bvh if bvh is not None else build_bvh(mesh)
    valid = atlas.valid
    pos = atlas.position[valid]
    nrm = atlas.normal[valid]
    w_img, h_img = views.resolution
    # Colors are accumulated as offsets from the first contributing sample so
    # that identical samples fuse to that exact value.
    ref = np.zeros((len(pos), 3))
    have = np.zeros(len(pos), dtype=bool)
    acc = np.zeros((len(pos), 3))
    wsum = np.zeros(len(pos))
    for i in _view_order(views):
        view = views.views[i]
        seen = uv_cover(view, mesh, bvh, atlas, cos_threshold)[valid]
        cr = view.project(pos[seen], w_img, h_img)
        inside = ((cr[:, 0] >= -0.5) & (cr[:, 0] <= w_img - 0.5)
                  & (cr[:, 1] >= -0.5) & (cr[:, 1] <= h_img - 0.5))
        idx = np.nonzero(seen)[0][inside]
        cr = cr[inside]
        w = np.clip(nrm[idx] @ -view.forward(), 0.0, 1.0) ** k
        sample = _bilinear(views.images[i], cr[:, 0], cr[:, 1])
        first = ~have[idx]
        ref[idx[first]] = sample[first]
        have[idx] = True
        acc[idx] += w[:, None] * (sample - ref[idx])
        wsum[idx] += w
    hit = wsum > 0
    rgb = np.zeros((atlas.height, atlas.width, 3))
    cov = np.zeros((atlas.height, atlas.width), dtype=bool)
    vals = np.zeros_like(acc)
    vals[hit] = ref[hit] + acc[hit] / wsum[hit, None]
    rgb[valid] = vals
    cov[valid] = hit
    return TextureMap(atlas.width, atlas.height, rgb, cov)


def texture_to_vertex_colors(mesh: TriMesh, atlas: UvAtlas, tex: TextureMap) -> VertexColors:
    """Average the covered texels lying within one texel (center distance, in
    texel units) of a vertex's UV corner, counting only texels that belong to
    faces incident to that vertex. A vertex with no such texel falls back to
    the nearest covered texel of its incident faces within
    ``VERTEX_FALLBACK_RADIUS`` texels."""
    if mesh.uvs is None:
        raise MissingUvs("mesh has no per-corner UVs")
    W, H = atlas.width, atlas.height
    n = mesh.n_vertices
    xy = mesh.uvs.reshape(-1, 2) * (W, H)                   # corner UVs in texel units
    vert = mesh.faces.reshape(-1)
    j0 = np.floor(xy[:, 0] - 1.5).astype(np.int64)
    i0 = np.floor(xy[:, 1] - 1.5).astype(np.int64)
    off = np.arange(4)
    jj = (j0[:, None, None] + off[None, None, :]).repeat(4, axis=1)
    ii = (i0[:, None, None] + off[None, :, None]).repeat(4, axis=2)
    vv = np.broadcast_to(vert[:, None, None], jj.shape)
    cx = np.broadcast_to(xy[:, 0, None, None], jj.shape)
    cy = np.broadcast_to(xy[:, 1, None, None], jj.shape)
    jj, ii, vv, cx, cy = (a.reshape(-1) for a in (jj, ii, vv, cx, cy))
    ok = (jj >= 0) & (jj < W) & (ii >= 0) & (ii < H)
    jj, ii, vv, cx, cy = jj[ok], ii[ok], vv[ok], cx[ok], cy[ok]
    d2 = (jj + 0.5 - cx) ** 2 + (ii + 0.5 - cy) ** 2
    f = atlas.face[ii, jj]
    ok = (d2 <= 1.0) & tex.covered[ii, jj] & (f >= 0)
    jj, ii, vv, f = jj[ok], ii[ok], vv[ok], f[ok]
    ok = np.any(mesh.faces[f] == vv[:, None], axis=1)
    pairs = np.unique(np.stack([vv[ok], ii[ok] * W + jj[ok]], axis=1), axis=0)
    colors = np.zeros((n, 3))
    count = np.bincount(pairs[:, 0], minlength=n)
    flat = tex.rgb.reshape(-1, 3)
    for c in range(3):
        colors[:, c] = np.bincount(pairs[:, 0], weights=flat[pairs[:, 1], c], minlength=n)
    textured = count > 0
    colors[textured] /= count[textured, None]
    if not textured.all():
        _nearest_incident_texel(mesh, atlas, tex, xy, colors, textured)
    return VertexColors(colors, textured)


def _nearest_incident_texel(mesh, atlas, tex, corner_xy, colors, textured):
    """Vertices whose UV corners have no texel center within one texel (thin
    wedges at a pole) take the covered texel of an incident face closest to
    one of their corners, searched out to ``VERTEX_FALLBACK_RADIUS`` texels.
    Ties go to the lowest texel index."""
    W = atlas.width
    sel = atlas.valid & tex.covered
    if not sel.any():
        return
    ii, jj = np.nonzero(sel)
    f = atlas.face[ii, jj]
    flat = ii * W + jj
    verts = mesh.faces[f]                                   # (T, 3)
    cxy = corner_xy.reshape(-1, 3, 2)[f]                    # (T, 3, 2)
    d2 = (jj[:, None] + 0.5 - cxy[..., 0]) ** 2 + (ii[:, None] + 0.5 - cxy[..., 1]) ** 2
    v = verts.ravel()
    d2 = d2.ravel()
    t = np.repeat(flat, 3)
    want = ~textured[v] & (d2 <= VERTEX_FALLBACK_RADIUS ** 2)
    v, d2, t = v[want], d2[want], t[want]
    if not len(v):
        return
    order = np.lexsort((t, d2, v))
    v, t = v[order], t[order]
    first = np.ones(len(v), dtype=bool)
    first[1:] = v[1:] != v[:-1]
    colors[v[first]] = tex.rgb.reshape(-1, 3)[t[first]]
    textured[v[first]] = True


def propagate_vertex_colors(mesh: TriMesh, vc: VertexColors, eps: float = INPAINT_EPS):
    """Breadth-first spread of colors over mesh edges.

    Each wave colors every untextured vertex adjacent to a textured one with
    the inverse-distance-weighted mean of its textured neighbors; all of a
    wave's updates read the state from before the wave. Returns the new
    VertexColors and the number of waves.
    """
    colors = vc.colors.copy()
    textured = vc.textured.copy()
    e = mesh.faces[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2)
    e = np.unique(np.sort(e, axis=1), axis=0)
    src = np.concatenate([e[:, 0], e[:, 1]])
    dst = np.concatenate([e[:, 1], e[:, 0]])
    w_edge = 1.0 / np.maximum(np.linalg.norm(mesh.vertices[src] - mesh.vertices[dst], axis=1), eps)
    n = mesh.n_vertices
    waves = 0
    while True:
        use = textured[src] & ~textured[dst]
        if not use.any():
            break
        wsum = np.bincount(dst[use], weights=w_edge[use], minlength=n)
        new = wsum > 0
        for c in range(3):
            acc = np.bincount(dst[use], weights=w_edge[use] * colors[src[use], c], minlength=n)
            colors[new, c] = acc[new] / wsum[new]
        textured |= new
        waves += 1
    return VertexColors(colors, textured), waves


def inpaint(mesh: TriMesh, atlas: UvAtlas, tex: TextureMap, eps: float = INPAINT_EPS) -> TextureMap:
    """Fill every uncovered valid texel from the colors of its face's vertices.

    Vertex colors come from the covered texels and are then propagated over
    the mesh graph. A texel takes the mean of its face's textured vertex
    colors weighted by 1 / max(3D distance, eps). Faces with no textured
    vertex (components never reached by a seed) take the color of the
    nearest textured vertex.
    """
    if not tex.covered.any():
        raise NoSeedTexels("no covered texel to inpaint from")
    vc = texture_to_vertex_colors(mesh, atlas, tex)
    if not vc.textured.any():
        raise NoSeedTexels("covered texels reach no mesh vertex")
    vc, _ = propagate_vertex_colors(mesh, vc, eps)
    rgb = tex.rgb.copy()
    hole = atlas.valid & ~tex.covered
    if hole.any():
        fv = mesh.faces[atlas.face[hole]]                       # (n, 3)
        p = atlas.position[hole]
        d = np.linalg.norm(mesh.vertices[fv] - p[:, None, :], axis=2)
        w = np.where(vc.textured[fv], 1.0 / np.maximum(d, eps), 0.0)
        wsum = w.sum(axis=1)
        out = np.einsum("nk,nkc->nc", w, vc.colors[fv])
        ok = wsum > 0
        out[ok] /= wsum[ok, None]
        if not ok.all():
            from .lowpoly.kdtree import KdTree
            seeds = np.nonzero(vc.textured)[0]
            tree = KdTree(mesh.vertices[seeds])
            nn, _ = tree.nearest_many(p[~ok])
            out[~ok] = vc.colors[seeds[nn]]
        rgb[hole] = out
    return TextureMap(tex.width, tex.height, rgb, atlas.valid.copy())


def axis_projection_uvs(mesh: TriMesh, margin: float = 0.02) -> TriMesh:
    """Fallback atlas: each face goes to the tile of its dominant normal axis
    (+x, -x, +y, -y, +z, -z laid out 3 x 2) and is projected orthographically
    onto that tile. Faces sharing a tile may overlap in UV space."""
    fn = mesh.face_normals()
    ax = np.argmax(np.abs(fn), axis=1)
    sign = np.take_along_axis(fn, ax[:, None], axis=1)[:, 0] < 0
    tile = 2 * ax + sign
    lo, hi = mesh.bounds()
    ext = np.maximum(hi - lo, 1e-12)
    corners = mesh.corners()
    uvs = np.zeros((mesh.n_faces, 3, 2))
    span = 1.0 - 2 * margin
    for t in range(6):
        sel = tile == t
        if not sel.any():
            continue
        a = t // 2
        u_ax, v_ax = [i for i in range(3) if i != a]
        s = max(ext[u_ax], ext[v_ax])
        local = np.stack([(corners[sel, :, u_ax] - lo[u_ax]) / s,
                          (corners[sel, :, v_ax] - lo[v_ax]) / s], axis=-1)
        if t % 2:
            local[..., 0] = ext[u_ax] / s - local[..., 0]
        col, row = t % 3, t // 3
        uvs[sel, :, 0] = (col + margin + span * local[..., 0]) / 3.0
        uvs[sel, :, 1] = (row + margin + span * local[..., 1]) / 2.0
    return mesh.replace(uvs=np.clip(uvs, 0.0, 1.0))


def upsample_image(img: np.ndarray, factor: int) -> np.ndarray:
    """Bilinear upsampling by an integer factor with edge clamping; output
    pixel centers map back to ``(i + 0.5) / factor - 0.5`` in the source."""
    factor = int(factor)
    if factor < 1:
        raise ValueError("upsample factor must be >= 1")
    img = np.asarray(img, dtype=np.float64)
    if factor == 1:
        return img.copy()
    h, w = img.shape[:2]
    rows = (np.arange(h * factor) + 0.5) / factor - 0.5
    cols = (np.arange(w * factor) + 0.5) / factor - 0.5
    rr, cc = np.meshgrid(rows, cols, indexing="ij")
    flat = img.reshape(h, w, -1)
    out = _bilinear(flat, cc.ravel(), rr.ravel())
    return out.reshape((h * factor, w * factor) + img.shape[2:])


def upsample_texture(tex: TextureMap, factor: int) -> TextureMap:
    cov = np.repeat(np.repeat(tex.covered, factor, axis=0), factor, axis=1)
    return TextureMap(tex.width * factor, tex.height * factor,
                      upsample_image(tex.rgb, factor), cov)


def to_uint8(rgb: np.ndarray) -> np.ndarray:
    return np.round(np.clip(rgb, 0.0, 1.0) * 255.0).astype(np.uint8)


def load_image(path) -> np.ndarray:
    """PNG (or any Pillow format) to (H, W, 3) float64 in [0, 1], row 0 at top."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(str(path))
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"), dtype=np.float64) / 255.0


def save_image(path, rgb: np.ndarray) -> None:
    Image.fromarray(to_uint8(rgb), mode="RGB").save(path)


def save_texture(tex: TextureMap, path, mask_path=None) -> None:
    save_image(path, tex.rgb[::-1])
    if mask_path is not None:
        Image.fromarray((tex.covered[::-1] * 255).astype(np.uint8), mode="L").save(mask_path)


def load_texture(path, mask_path=None) -> TextureMap:
    """Inverse of :func:`save_texture`. Without a mask every texel counts as
    covered."""
    rgb = load_image(path)[::-1]
    h, w = rgb.shape[:2]
    if mask_path is not None:
        with Image.open(mask_path) as im:
            cov = np.asarray(im.convert("L"))[::-1] >= 128
        if cov.shape != (h, w):
            raise ValueError("mask resolution differs from texture")
    else:
        cov = np.ones((h, w), dtype=bool)
    return TextureMap(w, h, rgb, cov)
