from .field import (SdfGrid, grid_from_function, inside_mask, load_sdf_grid,
                    sample_sdf_grid, save_sdf_grid, signed_distance,
                    signed_distance_many, unsigned_distance)
from .marching_cubes import marching_cubes
from .metrics import AnalyticSphere, surface_iou, volume_iou

__all__ = [
    "SdfGrid", "signed_distance", "signed_distance_many", "unsigned_distance",
    "inside_mask", "sample_sdf_grid", "grid_from_function", "save_sdf_grid",
    "load_sdf_grid", "marching_cubes", "volume_iou", "surface_iou", "AnalyticSphere",
]
