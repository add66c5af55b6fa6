"""Geometry kernels for textured 3D asset pipelines: surface sampling, signed
distance fields and marching cubes, coverage-driven view selection, texture
baking and inpainting, low-poly stylization, and small flow-matching and
attention kernels."""

from .errors import TexGeoError
from .mesh_core import TriMesh, build_bvh, load_mesh, rasterize_uv_atlas, save_obj

__version__ = "0.1.0"

__all__ = ["TexGeoError", "TriMesh", "build_bvh", "load_mesh", "save_obj",
           "rasterize_uv_atlas", "__version__"]
