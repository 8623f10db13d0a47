"""Projection models, normal maps, depth metrics, and depth-pair meshing."""

from dualdepth.geometry.cameras import CameraIntrinsics, OrthoCamera, fit_ortho_camera
from dualdepth.geometry.pointcloud import (
    ColoredPointCloud,
    ortho_unproject,
    project_orthographic,
    project_perspective,
    unproject_perspective,
)
from dualdepth.geometry.normals import compute_normals, normals_from_point_grid
from dualdepth.geometry.inpaint import inpaint_holes, interior_holes
from dualdepth.geometry.meshing import TriangleMesh, build_mesh
from dualdepth.geometry.metrics import depth_error, normal_gradient_energy

__all__ = [
    "CameraIntrinsics",
    "OrthoCamera",
    "fit_ortho_camera",
    "ColoredPointCloud",
    "unproject_perspective",
    "project_orthographic",
    "project_perspective",
    "ortho_unproject",
    "compute_normals",
    "normals_from_point_grid",
    "inpaint_holes",
    "interior_holes",
    "TriangleMesh",
    "build_mesh",
    "depth_error",
    "normal_gradient_energy",
]
