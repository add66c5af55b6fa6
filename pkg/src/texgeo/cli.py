"""Command-line entry point: ``texgeo <subcommand> [flags]``.

Exit codes: 0 success, 1 runtime error, 2 invalid arguments. Every run can
write a JSON report (``--report``); its ``parameters`` block is accepted
back by ``--config`` to repeat the run.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from .errors import TexGeoError

REPORT_VERSION = 1
COMMANDS = ("sample", "sdf-grid", "extract", "iou", "select-views", "bake",
            "inpaint", "lowpoly", "flow-demo", "attn-check", "pipeline")
# Keys every subparser carries that are not run parameters.
_META = {"command", "config", "report"}


class UsageError(Exception):
    def __init__(self, flag, message):
        self.flag = flag
        super().__init__(f"{flag}: {message}")


class Report:
    def __init__(self, command):
        self.command = command
        self.parameters = {}
        self.inputs = {}
        self.outputs = {}
        self.metrics = {}
        self.timings = {}

    @contextmanager
    def timer(self, stage):
        t0 = time.perf_counter()
        try:
            yield
        finally:
            self.timings[stage] = round(time.perf_counter() - t0, 6)

    def add_input(self, name, path):
        self.inputs[name] = _file_record(path)

    def add_output(self, name, path):
        self.outputs[name] = _file_record(path)

    def to_json(self, status, code, error=None) -> dict:
        return {
            "report_version": REPORT_VERSION,
            "command": self.command,
            "status": status,
            "exit_code": code,
            "error": error,
            "parameters": self.parameters,
            "inputs": self.inputs,
            "outputs": self.outputs,
            "metrics": self.metrics,
            "timings": self.timings,
        }


def _file_record(path):
    p = Path(path)
    if p.is_dir():
        return {"path": str(p)}
    return {"path": str(p), "sha256": hashlib.sha256(p.read_bytes()).hexdigest()}


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    return x


# ---------------------------------------------------------------- validation

def _need(ns, *names):
    for n in names:
        if getattr(ns, n) is None:
            raise UsageError(_flag(n), "is required")


def _flag(dest):
    return "--" + dest.replace("_", "-")


def _positive(ns, *names):
    for n in names:
        v = getattr(ns, n)
        if v is not None and not v > 0:
            raise UsageError(_flag(n), f"must be > 0 (got {v})")


def _nonneg(ns, *names):
    for n in names:
        v = getattr(ns, n)
        if v is not None and v < 0:
            raise UsageError(_flag(n), f"must be >= 0 (got {v})")


def _exists(ns, *names):
    for n in names:
        v = getattr(ns, n)
        if v is not None and not Path(v).exists():
            raise UsageError(_flag(n), f"no such file or directory: {v}")


def _cos(ns):
    if not -1.0 <= ns.cos <= 1.0:
        raise UsageError("--cos", f"must lie in [-1, 1] (got {ns.cos})")


def _views_bounds(ns):
    _nonneg(ns, "nfixed")
    _positive(ns, "nmax")
    if ns.nfixed > ns.nmax:
        raise UsageError("--nfixed", f"must satisfy nfixed <= nmax (got {ns.nfixed} > {ns.nmax})")


def _seed_of(ns):
    return int(ns.seed)


def _set_threads(n):
    if n and n > 0:
        import numba
        numba.set_num_threads(min(int(n), numba.config.NUMBA_NUM_THREADS))


# ---------------------------------------------------------------- helpers

def _load_mesh_arg(path, rep, name="mesh", fallback_uvs=False, need_uvs=False):
    from .mesh_core.io import load_mesh
    from .texture_bake import axis_projection_uvs
    rep.add_input(name, path)
    mesh = load_mesh(path)
    if need_uvs and mesh.uvs is None and fallback_uvs:
        mesh = axis_projection_uvs(mesh)
        rep.metrics["fallback_uvs"] = True
    return mesh


def _mask_path(out, mask):
    if mask:
        return Path(mask)
    out = Path(out)
    return out.with_name(out.stem + "_mask.png")


def _read_manifest(path):
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    return data["views"] if isinstance(data, dict) else data


def _load_view_images(views_json, images_dir):
    """Viewpoints from ``views_json`` and their images from ``images_dir``.

    An entry's ``image`` key names its file; otherwise ``view_<i>.png``
    (three digits) is used.
    """
    from .texture_bake import MultiViewImages, load_image
    from .view_select import Viewpoint
    entries = _read_manifest(views_json)
    views, imgs = [], []
    for i, e in enumerate(entries):
        views.append(Viewpoint.from_json(e))
        imgs.append(load_image(Path(images_dir) / e.get("image", f"view_{i:03d}.png")))
    return MultiViewImages(views, imgs)


def _save_texture(tex, out, mask, rep):
    from .texture_bake import save_texture
    mp = _mask_path(out, mask)
    save_texture(tex, out, mp)
    rep.add_output("texture", out)
    rep.add_output("mask", mp)


# ---------------------------------------------------------------- commands

def _v_sample(ns):
    _need(ns, "mesh", "out")
    _exists(ns, "mesh")
    _positive(ns, "uniform", "importance")
    _nonneg(ns, "fps")
    if ns.fps > ns.uniform + ns.importance:
        raise UsageError("--fps", "exceeds --uniform + --importance")
    if not 0.0 < ns.dihedral < 180.0:
        raise UsageError("--dihedral", "must lie in (0, 180)")


def _c_sample(ns, rep):
    from .mesh_core.io import save_point_cloud_ply
    from .mesh_core.mesh import normalize_to_unit_cube
    from .sampling import build_point_query, sample_importance, sample_uniform
    mesh = _load_mesh_arg(ns.mesh, rep)
    if ns.normalize:
        mesh = normalize_to_unit_cube(mesh)
    s_u, s_i, s_q = np.random.SeedSequence(_seed_of(ns)).spawn(3)
    with rep.timer("sample"):
        pu = sample_uniform(mesh, ns.uniform, np.random.default_rng(s_u))
        pi = sample_importance(mesh, ns.importance, np.random.default_rng(s_i), ns.dihedral)
    n_u = min(ns.fps // 2, ns.uniform)
    n_i = ns.fps - n_u
    if n_i > ns.importance:
        n_i, n_u = ns.importance, ns.fps - ns.importance
    with rep.timer("fps"):
        q = build_point_query(pu, pi, n_u, n_i, np.random.default_rng(s_q))
    pos = q.combined
    nrm = np.concatenate([pu.normals[q.uniform_index], pi.normals[q.importance_index]])
    save_point_cloud_ply(ns.out, pos, nrm)
    rep.add_output("points", ns.out)
    rep.metrics.update(n_points=len(pos), n_uniform_query=n_u, n_importance_query=n_i,
                       importance_fallback=pi.used_fallback)


def _v_sdf_grid(ns):
    if (ns.mesh is None) == (ns.analytic_sphere is None):
        raise UsageError("--mesh", "give exactly one of --mesh or --analytic-sphere")
    _need(ns, "out")
    _exists(ns, "mesh")
    if ns.dims < 2:
        raise UsageError("--dims", f"must be >= 2 (got {ns.dims})")
    _positive(ns, "analytic_sphere")
    lo, hi = ns.domain[:3], ns.domain[3:]
    if any(h <= l for l, h in zip(lo, hi)):
        raise UsageError("--domain", "each max must exceed its min")
    ext = [h - l for l, h in zip(lo, hi)]
    if max(ext) - min(ext) > 1e-12 * max(ext):
        raise UsageError("--domain", "must be a cube so grid spacing is equal on every axis")


def _c_sdf_grid(ns, rep):
    from .mesh_core.mesh import normalize_to_unit_cube
    from .sdf import AnalyticSphere, grid_from_function, sample_sdf_grid, save_sdf_grid
    domain = (tuple(ns.domain[:3]), tuple(ns.domain[3:]))
    with rep.timer("grid"):
        if ns.analytic_sphere is not None:
            grid = grid_from_function(AnalyticSphere(radius=ns.analytic_sphere).sdf, ns.dims, domain)
        else:
            mesh = _load_mesh_arg(ns.mesh, rep)
            if ns.normalize:
                mesh = normalize_to_unit_cube(mesh)
            grid = sample_sdf_grid(mesh, ns.dims, domain)
    save_sdf_grid(grid, ns.out)
    rep.add_output("grid", ns.out)
    rep.metrics.update(dims=list(grid.dims), spacing=grid.spacing,
                       min_value=float(grid.values.min()), max_value=float(grid.values.max()))


def _v_extract(ns):
    _need(ns, "grid", "out")
    _exists(ns, "grid")


def _c_extract(ns, rep):
    from .mesh_core.io import save_obj
    from .sdf import load_sdf_grid, marching_cubes
    rep.add_input("grid", ns.grid)
    grid = load_sdf_grid(ns.grid)
    with rep.timer("marching_cubes"):
        mesh = marching_cubes(grid, ns.iso)
    save_obj(mesh, ns.out)
    rep.add_output("mesh", ns.out)
    rep.metrics.update(n_vertices=mesh.n_vertices, n_faces=mesh.n_faces,
                       watertight=mesh.is_watertight())


def _v_iou(ns):
    _need(ns, "a", "b")
    _exists(ns, "a", "b")
    _positive(ns, "samples", "band")


def _c_iou(ns, rep):
    from .sdf import surface_iou, volume_iou
    a = _load_mesh_arg(ns.a, rep, "a")
    b = _load_mesh_arg(ns.b, rep, "b")
    if ns.metric in ("volume", "both"):
        with rep.timer("volume_iou"):
            v = volume_iou(a, b, ns.samples, _seed_of(ns))
        rep.metrics.update(iou=v, v_iou=v)
    if ns.metric in ("surface", "both"):
        with rep.timer("surface_iou"):
            s = surface_iou(a, b, ns.band, ns.samples, _seed_of(ns))
        rep.metrics["s_iou"] = s
        rep.metrics.setdefault("iou", s)
    if ns.out:
        Path(ns.out).write_text(json.dumps({k: rep.metrics[k] for k in sorted(rep.metrics)},
                                           indent=2) + "\n", encoding="utf-8")
        rep.add_output("metrics", ns.out)


def _v_select_views(ns):
    _need(ns, "mesh", "out")
    _exists(ns, "mesh", "candidates")
    _views_bounds(ns)
    _positive(ns, "atlas", "distance", "half_width")
    _cos(ns)


def _select(ns, rep, mesh, candidates):
    from .mesh_core.atlas import rasterize_uv_atlas
    from .mesh_core.bvh import build_bvh
    from .view_select import camera_defaults, greedy_select
    with rep.timer("atlas"):
        atlas = rasterize_uv_atlas(mesh, ns.atlas, ns.atlas)
        bvh = build_bvh(mesh)
    d0, w0 = camera_defaults(mesh)
    with rep.timer("greedy"):
        vs = greedy_select(candidates, mesh, atlas, ns.nfixed, ns.nmax, bvh, ns.cos,
                           ns.distance or d0, ns.half_width or w0)
    n_valid = atlas.n_valid
    rep.metrics.update(n_candidates=len(candidates), n_selected=len(vs.selected),
                       gains=vs.gains, covered=vs.covered, n_valid_texels=n_valid,
                       coverage=vs.covered[-1] / n_valid if n_valid else 0.0)
    return vs, atlas, bvh


def _print_gains(vs):
    print("iter  azimuth  elevation  gain  covered")
    for i, (v, g, c) in enumerate(zip(vs.selected[vs.n_fixed:], vs.gains, vs.covered[1:])):
        print(f"{i + vs.n_fixed:4d}  {v.azimuth:7.2f}  {v.elevation:9.2f}  {g:4d}  {c}")


def _c_select_views(ns, rep):
    from .view_select import camera_defaults, default_candidates, load_views, save_views
    mesh = _load_mesh_arg(ns.mesh, rep, fallback_uvs=ns.fallback_uvs, need_uvs=True)
    d0, w0 = camera_defaults(mesh)
    if ns.candidates:
        rep.add_input("candidates", ns.candidates)
        cands = load_views(ns.candidates)
    else:
        cands = default_candidates(ns.distance or d0, ns.half_width or w0)
    vs, _, _ = _select(ns, rep, mesh, cands)
    save_views(ns.out, vs.selected, {"n_fixed": vs.n_fixed, "gains": vs.gains, "covered": vs.covered})
    rep.add_output("views", ns.out)
    _print_gains(vs)


def _v_bake(ns):
    _need(ns, "mesh", "views", "images", "out")
    _exists(ns, "mesh", "views", "images")
    _positive(ns, "size", "upsample")
    _nonneg(ns, "k")
    _cos(ns)


def _c_bake(ns, rep):
    from .mesh_core.atlas import rasterize_uv_atlas
    from .mesh_core.bvh import build_bvh
    from .texture_bake import bake, upsample_texture
    mesh = _load_mesh_arg(ns.mesh, rep, fallback_uvs=ns.fallback_uvs, need_uvs=True)
    rep.add_input("views", ns.views)
    rep.add_input("images", ns.images)
    mv = _load_view_images(ns.views, ns.images)
    with rep.timer("atlas"):
        atlas = rasterize_uv_atlas(mesh, ns.size, ns.size)
        bvh = build_bvh(mesh)
    with rep.timer("bake"):
        tex = bake(atlas, mesh, bvh, mv, ns.cos, ns.k)
    rep.metrics.update(n_views=len(mv), n_valid_texels=atlas.n_valid,
                       n_covered=int(tex.covered.sum()),
                       coverage=float(tex.covered.sum() / max(atlas.n_valid, 1)))
    if ns.upsample > 1:
        tex = upsample_texture(tex, ns.upsample)
    _save_texture(tex, ns.out, ns.mask, rep)


def _v_inpaint(ns):
    _need(ns, "mesh", "texture", "out")
    _exists(ns, "mesh", "texture", "mask")
    _positive(ns, "upsample")


def _c_inpaint(ns, rep):
    from .mesh_core.atlas import rasterize_uv_atlas
    from .texture_bake import TextureMap, inpaint, load_texture, upsample_texture
    mesh = _load_mesh_arg(ns.mesh, rep, fallback_uvs=ns.fallback_uvs, need_uvs=True)
    rep.add_input("texture", ns.texture)
    if ns.mask:
        rep.add_input("mask", ns.mask)
    tex = load_texture(ns.texture, ns.mask)
    atlas = rasterize_uv_atlas(mesh, tex.width, tex.height)
    tex = TextureMap(tex.width, tex.height, tex.rgb, tex.covered & atlas.valid)
    with rep.timer("inpaint"):
        out = inpaint(mesh, atlas, tex)
    rep.metrics.update(n_valid_texels=atlas.n_valid, n_seed_texels=int(tex.covered.sum()),
                       n_filled=int(atlas.n_valid - tex.covered.sum()))
    if ns.upsample > 1:
        out = upsample_texture(out, ns.upsample)
    _save_texture(out, ns.out, ns.out_mask, rep)


def _v_lowpoly(ns):
    _need(ns, "mesh", "texture", "out", "out_texture")
    _exists(ns, "mesh", "texture", "mask")
    if ns.target_faces < 1:
        raise UsageError("--target-faces", f"must be >= 1 (got {ns.target_faces})")
    _positive(ns, "size")


def _c_lowpoly(ns, rep):
    from .errors import TargetUnreachable
    from .lowpoly import qem_decimate, rebake_lowpoly, transfer_texture
    from .mesh_core.atlas import rasterize_uv_atlas
    from .mesh_core.io import save_obj
    from .texture_bake import TextureMap, inpaint, load_texture, save_texture
    dense = _load_mesh_arg(ns.mesh, rep, fallback_uvs=ns.fallback_uvs, need_uvs=True)
    rep.add_input("texture", ns.texture)
    tex = load_texture(ns.texture, ns.mask)
    atlas = rasterize_uv_atlas(dense, tex.width, tex.height)
    tex = TextureMap(tex.width, tex.height, tex.rgb, tex.covered & atlas.valid)
    if not tex.covered[atlas.valid].all():
        with rep.timer("inpaint"):
            tex = inpaint(dense, atlas, tex)
        rep.metrics["inpainted_input"] = True
    with rep.timer("decimate"):
        try:
            low = qem_decimate(dense.replace(uvs=None, normals=None), ns.target_faces)
        except TargetUnreachable as exc:
            if not ns.allow_partial:
                raise
            low = exc.mesh
            rep.metrics["target_unreachable"] = True
    with rep.timer("transfer"):
        colors = transfer_texture(dense, atlas, tex, low)
    size = ns.size or tex.width
    with rep.timer("rebake"):
        low_tex, low = rebake_lowpoly(low, colors, size)
    out = Path(ns.out)
    mtl = out.with_suffix(".mtl")
    tex_path = Path(ns.out_texture)
    rel = Path(tex_path).resolve()
    try:
        rel = rel.relative_to(mtl.resolve().parent)
    except ValueError:
        pass
    mtl.write_text(f"newmtl lowpoly\nKd 1 1 1\nmap_Kd {rel.as_posix()}\n", encoding="utf-8")
    save_obj(low, out, mtllib=mtl.name, material="lowpoly")
    save_texture(low_tex, tex_path)
    rep.add_output("mesh", out)
    rep.add_output("material", mtl)
    rep.add_output("texture", tex_path)
    rep.metrics.update(input_faces=dense.n_faces, output_faces=low.n_faces,
                       output_vertices=low.n_vertices, manifold=low.is_manifold())


def _v_flow_demo(ns):
    _nonneg(ns, "steps", "lr")
    _positive(ns, "batch", "hidden", "eval_samples", "euler_steps")


def _c_flow_demo(ns, rep):
    from .neural_kernels import flow_demo
    with rep.timer("demo"):
        r = flow_demo(ns.steps, ns.lr, _seed_of(ns), ns.batch, ns.hidden,
                      n_eval=ns.eval_samples, euler_steps=ns.euler_steps)
    ratio = r.final_loss / r.initial_loss if r.initial_loss > 0 else 0.0
    rep.metrics.update(initial_loss=r.initial_loss, final_loss=r.final_loss, loss_ratio=ratio,
                       endpoint_mean=r.endpoint_mean, endpoint_std=r.endpoint_std,
                       grad_check_max_rel_err=r.grad_check, loss_curve=r.losses)
    if ns.out:
        payload = {k: rep.metrics[k] for k in ("initial_loss", "final_loss", "loss_ratio",
                                               "endpoint_mean", "endpoint_std",
                                               "grad_check_max_rel_err", "loss_curve")}
        Path(ns.out).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
        rep.add_output("curve", ns.out)


def _v_attn_check(ns):
    _positive(ns, "n", "m", "d")


def _c_attn_check(ns, rep):
    from .neural_kernels import multi_task_attention, sdpa
    rng = np.random.default_rng(_seed_of(ns))
    n, m, d = ns.n, ns.m, ns.d
    z = rng.standard_normal((n, d))
    ref = tuple(rng.standard_normal(s) for s in ((n, d), (m, d), (m, d)))
    mv = tuple(rng.standard_normal(s) for s in ((n, d), (m + 1, d), (m + 1, d)))
    with rep.timer("checks"):
        ident = multi_task_attention(z, ref, mv, 0.0, 0.0)
        _, w = sdpa(*ref, return_weights=True)
        row_err = float(np.abs(w.sum(axis=1) - 1.0).max())
        lam = float(rng.uniform(0.1, 2.0))
        f = lambda a, b: multi_task_attention(z, ref, mv, a, b)
        lin_err = float(np.abs((f(2 * lam, 2 * lam) - f(0, 0)) - 2 * (f(lam, lam) - f(0, 0))).max())
    checks = {
        "identity_bit_exact": bool(np.array_equal(ident, z)),
        "softmax_row_sum_max_err": row_err,
        "softmax_rows_ok": row_err <= 1e-9,
        "lambda_linearity_max_err": lin_err,
        "lambda_linearity_ok": lin_err <= 1e-12,
    }
    rep.metrics.update(checks)
    rep.metrics["all_passed"] = bool(checks["identity_bit_exact"] and checks["softmax_rows_ok"]
                                     and checks["lambda_linearity_ok"])
    if ns.out:
        Path(ns.out).write_text(json.dumps(checks, indent=2) + "\n", encoding="utf-8")
        rep.add_output("checks", ns.out)
    if not rep.metrics["all_passed"]:
        raise TexGeoError("attention property check failed")


def _v_pipeline(ns):
    _need(ns, "mesh", "images", "out")
    _exists(ns, "mesh", "images")
    if not (Path(ns.images) / "views.json").is_file():
        raise UsageError("--images", "directory must contain a views.json manifest")
    _views_bounds(ns)
    _positive(ns, "atlas", "size", "upsample")
    _nonneg(ns, "k")
    _cos(ns)


def _c_pipeline(ns, rep):
    from .mesh_core.atlas import rasterize_uv_atlas
    from .texture_bake import MultiViewImages, bake, inpaint, upsample_texture
    from .view_select import save_views
    mesh = _load_mesh_arg(ns.mesh, rep, fallback_uvs=ns.fallback_uvs, need_uvs=True)
    manifest = Path(ns.images) / "views.json"
    rep.add_input("manifest", manifest)
    pool = _load_view_images(manifest, ns.images)
    # Fixed views use the manifest's camera so their images line up.
    ns.distance = pool.views[0].distance
    ns.half_width = pool.views[0].half_width
    vs, _, bvh = _select(ns, rep, mesh, list(pool.views))
    chosen, imgs = [], []
    for v in vs.selected:
        match = [i for i, p in enumerate(pool.views) if p.same_direction(v)]
        if not match:
            raise TexGeoError(f"manifest has no image for view azimuth={v.azimuth} "
                              f"elevation={v.elevation}")
        chosen.append(pool.views[match[0]])
        imgs.append(pool.images[match[0]])
    _print_gains(vs)
    atlas = rasterize_uv_atlas(mesh, ns.size, ns.size)
    with rep.timer("bake"):
        tex = bake(atlas, mesh, bvh, MultiViewImages(chosen, imgs), ns.cos, ns.k)
    rep.metrics["baked_coverage"] = float(tex.covered.sum() / max(atlas.n_valid, 1))
    with rep.timer("inpaint"):
        tex = inpaint(mesh, atlas, tex)
    if ns.upsample > 1:
        tex = upsample_texture(tex, ns.upsample)
    _save_texture(tex, ns.out, ns.mask, rep)
    if ns.out_views:
        save_views(ns.out_views, chosen, {"n_fixed": vs.n_fixed, "gains": vs.gains})
        rep.add_output("views", ns.out_views)


_HANDLERS = {
    "sample": (_v_sample, _c_sample),
    "sdf-grid": (_v_sdf_grid, _c_sdf_grid),
    "extract": (_v_extract, _c_extract),
    "iou": (_v_iou, _c_iou),
    "select-views": (_v_select_views, _c_select_views),
    "bake": (_v_bake, _c_bake),
    "inpaint": (_v_inpaint, _c_inpaint),
    "lowpoly": (_v_lowpoly, _c_lowpoly),
    "flow-demo": (_v_flow_demo, _c_flow_demo),
    "attn-check": (_v_attn_check, _c_attn_check),
    "pipeline": (_v_pipeline, _c_pipeline),
}


# ---------------------------------------------------------------- parser

def _common(p, seed=None):
    p.add_argument("--config", help="JSON file of flag defaults (a run report also works)")
    p.add_argument("--report", help="write a JSON run report here")
    p.add_argument("--threads", type=int, default=0, help="worker threads, 0 = auto")
    if seed is not None:
        p.add_argument("--seed", type=int, default=seed)


def _view_flags(p):
    p.add_argument("--atlas", type=int, default=512, help="atlas resolution for coverage")
    p.add_argument("--nmax", type=int, default=12)
    p.add_argument("--nfixed", type=int, default=4)
    p.add_argument("--cos", type=float, default=0.2, help="facing threshold")
    p.add_argument("--fallback-uvs", action="store_true",
                   help="use an axis-projection atlas if the mesh has no UVs")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="texgeo", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", metavar="command")
    sub.required = True

    p = sub.add_parser("sample", help="uniform + sharp-edge sampling with FPS queries")
    _common(p, seed=7)
    p.add_argument("--mesh")
    p.add_argument("--uniform", type=int, default=8000)
    p.add_argument("--importance", type=int, default=8000)
    p.add_argument("--fps", type=int, default=1024, help="total queries, split evenly")
    p.add_argument("--dihedral", type=float, default=30.0, help="sharp-edge angle, degrees")
    p.add_argument("--normalize", action="store_true")
    p.add_argument("--out")

    p = sub.add_parser("sdf-grid", help="signed distance on a regular lattice")
    _common(p)
    p.add_argument("--mesh")
    p.add_argument("--analytic-sphere", type=float, metavar="RADIUS")
    p.add_argument("--dims", type=int, default=64)
    p.add_argument("--domain", type=float, nargs=6, default=[-1.0, -1.0, -1.0, 1.0, 1.0, 1.0],
                   metavar=("XMIN", "YMIN", "ZMIN", "XMAX", "YMAX", "ZMAX"))
    p.add_argument("--normalize", action="store_true")
    p.add_argument("--out")

    p = sub.add_parser("extract", help="marching cubes on a saved grid")
    _common(p)
    p.add_argument("--grid")
    p.add_argument("--iso", type=float, default=0.0)
    p.add_argument("--out")

    p = sub.add_parser("iou", help="volume and near-surface IoU")
    _common(p, seed=0)
    p.add_argument("--a")
    p.add_argument("--b")
    p.add_argument("--samples", type=int, default=200_000)
    p.add_argument("--band", type=float)
    p.add_argument("--metric", choices=("volume", "surface", "both"), default="both")
    p.add_argument("--out")

    p = sub.add_parser("select-views", help="greedy coverage view selection")
    _common(p)
    p.add_argument("--mesh")
    _view_flags(p)
    p.add_argument("--candidates", help="JSON candidate views (default: 44-view grid)")
    p.add_argument("--distance", type=float)
    p.add_argument("--half-width", type=float)
    p.add_argument("--out")

    p = sub.add_parser("bake", help="fuse view images into a UV texture")
    _common(p)
    p.add_argument("--mesh")
    p.add_argument("--views")
    p.add_argument("--images")
    p.add_argument("--size", type=int, default=1024)
    p.add_argument("--cos", type=float, default=0.2)
    p.add_argument("--k", type=float, default=4.0, help="cosine weight exponent")
    p.add_argument("--upsample", type=int, default=1)
    p.add_argument("--fallback-uvs", action="store_true")
    p.add_argument("--mask", help="coverage mask PNG (default <out>_mask.png)")
    p.add_argument("--out")

    p = sub.add_parser("inpaint", help="fill uncovered texels from vertex colors")
    _common(p)
    p.add_argument("--mesh")
    p.add_argument("--texture")
    p.add_argument("--mask", help="coverage mask of the input texture")
    p.add_argument("--upsample", type=int, default=1)
    p.add_argument("--fallback-uvs", action="store_true")
    p.add_argument("--out")
    p.add_argument("--out-mask")

    p = sub.add_parser("lowpoly", help="decimate, transfer colors, rebake")
    _common(p)
    p.add_argument("--mesh")
    p.add_argument("--texture")
    p.add_argument("--mask")
    p.add_argument("--target-faces", type=int, default=500)
    p.add_argument("--size", type=int, help="output texture size (default: input size)")
    p.add_argument("--allow-partial", action="store_true",
                   help="keep the partial mesh when the target is unreachable")
    p.add_argument("--fallback-uvs", action="store_true")
    p.add_argument("--out")
    p.add_argument("--out-texture")

    p = sub.add_parser("flow-demo", help="train the 2D flow-matching toy")
    _common(p, seed=1)
    p.add_argument("--steps", type=int, default=500)
    p.add_argument("--lr", type=float, default=0.05)
    p.add_argument("--batch", type=int, default=256)
    p.add_argument("--hidden", type=int, default=32)
    p.add_argument("--eval-samples", type=int, default=10_000)
    p.add_argument("--euler-steps", type=int, default=8)
    p.add_argument("--out")

    p = sub.add_parser("attn-check", help="multi-branch attention property checks")
    _common(p, seed=0)
    p.add_argument("--n", type=int, default=4)
    p.add_argument("--m", type=int, default=6)
    p.add_argument("--d", type=int, default=8)
    p.add_argument("--out")

    p = sub.add_parser("pipeline", help="select-views, bake and inpaint in one go")
    _common(p)
    p.add_argument("--mesh")
    p.add_argument("--images", help="directory with views.json and the images it names")
    _view_flags(p)
    p.add_argument("--size", type=int, default=1024)
    p.add_argument("--k", type=float, default=4.0)
    p.add_argument("--upsample", type=int, default=1)
    p.add_argument("--mask")
    p.add_argument("--out")
    p.add_argument("--out-views")
    return ap


def _subparser(ap, name):
    for act in ap._subparsers._group_actions:
        if name in act.choices:
            return act.choices[name]
    raise KeyError(name)


def _apply_config(ap, argv, ns):
    path = Path(ns.config)
    if not path.is_file():
        raise UsageError("--config", f"no such file: {path}")
    try:
        cfg = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise UsageError("--config", f"invalid JSON: {exc}") from None
    if isinstance(cfg, dict) and isinstance(cfg.get("parameters"), dict):
        cfg = cfg["parameters"]
    if not isinstance(cfg, dict):
        raise UsageError("--config", "must hold a JSON object")
    defaults = {}
    for key, val in cfg.items():
        dest = key.lstrip("-").replace("-", "_")
        if dest in _META or not hasattr(ns, dest):
            if dest in _META:
                continue
            raise UsageError("--config", f"unknown parameter {key!r} for {ns.command}")
        defaults[dest] = val
    _subparser(ap, ns.command).set_defaults(**defaults)
    return ap.parse_args(argv)


def run(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    ap = build_parser()
    try:
        ns = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    rep = Report(ns.command)
    validate, command = _HANDLERS[ns.command]
    try:
        if ns.config:
            ns = _apply_config(ap, argv, ns)
        validate(ns)
        if ns.threads < 0:
            raise UsageError("--threads", "must be >= 0")
    except UsageError as exc:
        print(f"texgeo {ns.command}: error: {exc}", file=sys.stderr)
        return 2
    except SystemExit as exc:
        return int(exc.code or 0)
    _set_threads(ns.threads)
    rep.parameters = {k: v for k, v in sorted(vars(ns).items()) if k not in _META}
    code, status, err = 0, "ok", None
    t0 = time.perf_counter()
    try:
        command(ns, rep)
    except (TexGeoError, OSError, ValueError) as exc:
        code, status, err = 1, "error", f"{type(exc).__name__}: {exc}"
        print(f"texgeo {ns.command}: {err}", file=sys.stderr)
    rep.timings["total"] = round(time.perf_counter() - t0, 6)
    payload = _jsonable(rep.to_json(status, code, err))
    if ns.report:
        Path(ns.report).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    if code == 0:
        summary = {k: v for k, v in payload["metrics"].items() if k != "loss_curve"}
        print(json.dumps({"command": ns.command, "status": status, "metrics": summary}))
    return code


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
