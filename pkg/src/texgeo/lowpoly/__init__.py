from .kdtree import KdTree, kd_nearest, kd_nearest_many
from .qem import qem_decimate, vertex_quadrics
from .transfer import per_face_chart_uvs, rebake_lowpoly, transfer_texture

__all__ = [
    "KdTree", "kd_nearest", "kd_nearest_many", "qem_decimate", "vertex_quadrics",
    "transfer_texture", "rebake_lowpoly", "per_face_chart_uvs",
]
