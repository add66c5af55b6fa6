from .atlas import UvAtlas, rasterize_uv_atlas
from .bvh import (Bvh, RayHit, build_bvh, closest_points, count_crossings,
                  occluded_many, ray_intersect, ray_intersect_many)
from .io import load_mesh, load_point_cloud_ply, save_obj, save_point_cloud_ply
from .mesh import TriMesh, normalize_to_unit_cube

__all__ = [
    "TriMesh", "normalize_to_unit_cube", "load_mesh", "save_obj",
    "save_point_cloud_ply", "load_point_cloud_ply", "Bvh", "RayHit", "build_bvh",
    "ray_intersect", "ray_intersect_many", "occluded_many", "count_crossings",
    "closest_points", "UvAtlas", "rasterize_uv_atlas",
]
