"""Depth-image unprojection and orthographic point splatting.

All three operations are pure: they allocate fresh arrays and never touch
their inputs.  Vectorized numpy throughout; reductions have a fixed order,
so results are bit-reproducible run to run.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from dualdepth.errors import InputError
from dualdepth.geometry.cameras import CameraIntrinsics, OrthoCamera


@dataclass(frozen=True)
class ColoredPointCloud:
    """Per-point position (mm), RGB color in [0, 1], and source pixel (u, v)."""

    positions: np.ndarray  # (n, 3) float64
    colors: np.ndarray  # (n, 3) float64
    pixels: np.ndarray  # (n, 2) int32, (u, v)

    def __post_init__(self):
        n = self.positions.shape[0]
        if self.positions.shape != (n, 3) or self.colors.shape != (n, 3) or self.pixels.shape != (n, 2):
            raise InputError("positions (n,3), colors (n,3) and pixels (n,2) must agree")
        if n and not np.all(np.isfinite(self.positions)):
            raise InputError("point positions must be finite")

    def __len__(self) -> int:
        return self.positions.shape[0]


def _check_raster_pair(depth: np.ndarray, color: np.ndarray | None, width: int, height: int):
    if depth.shape != (height, width):
        raise InputError(f"depth shape {depth.shape} does not match camera {height}x{width}")
    if color is not None and color.shape != (height, width, 3):
        raise InputError(f"color shape {color.shape} does not match camera {height}x{width}x3")


def unproject_perspective(
    depth: np.ndarray, color: np.ndarray, cam: CameraIntrinsics
) -> ColoredPointCloud:
    """Lift every valid depth pixel to a 3D colored point through the pinhole.

    Pixel (u, v) with depth z maps to ((u-cx)z/fx, (v-cy)z/fy, z).  Invalid
    (zero-depth) pixels are skipped.
    """
    depth = np.asarray(depth, dtype=np.float64)
    color = np.asarray(color, dtype=np.float64)
    _check_raster_pair(depth, color, cam.width, cam.height)
    v, u = np.nonzero(depth > 0)
    z = depth[v, u]
    x = (u - cam.cx) * z / cam.fx
    y = (v - cam.cy) * z / cam.fy
    positions = np.stack([x, y, z], axis=1)
    pixels = np.stack([u, v], axis=1).astype(np.int32)
    return ColoredPointCloud(positions=positions, colors=color[v, u], pixels=pixels)


def ortho_unproject(
    depth: np.ndarray, cam: OrthoCamera, color: np.ndarray | None = None
) -> ColoredPointCloud:
    """Lift an orthographic depth map back to points on the camera's grid.

    Pixel (u, v, z) maps to (origin_x + u*pitch, origin_y + v*pitch, z).
    Inverse of `project_orthographic` on valid pixels.
    """
    depth = np.asarray(depth, dtype=np.float64)
    _check_raster_pair(depth, color, cam.width, cam.height)
    v, u = np.nonzero(depth > 0)
    z = depth[v, u]
    x = cam.origin_x + u * cam.pixel_pitch
    y = cam.origin_y + v * cam.pixel_pitch
    positions = np.stack([x, y, z], axis=1)
    if color is None:
        colors = np.zeros((len(z), 3), dtype=np.float64)
    else:
        colors = np.asarray(color, dtype=np.float64)[v, u]
    pixels = np.stack([u, v], axis=1).astype(np.int32)
    return ColoredPointCloud(positions=positions, colors=colors, pixels=pixels)


def _zbuffer_splat(
    u: np.ndarray,
    v: np.ndarray,
    z: np.ndarray,
    colors: np.ndarray,
    height: int,
    width: int,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Scatter points onto a (height, width) grid; the smallest z per pixel
    wins, ties keep the earliest input point.  Out-of-frame or nonpositive-z
    points are dropped silently."""
    depth = np.zeros((height, width), dtype=np.float64)
    color = np.zeros((height, width, 3), dtype=np.float64)
    mask = np.zeros((height, width), dtype=bool)
    keep = (u >= 0) & (u < width) & (v >= 0) & (v < height) & (z > 0)
    if not np.any(keep):
        return depth, color, mask
    u, v, z, colors = u[keep], v[keep], z[keep], colors[keep]

    flat = v * width + u
    # Stable sort by (pixel, z): the first entry of each pixel group is the
    # z-buffer winner.
    order = np.lexsort((np.arange(len(flat)), z, flat))
    flat_sorted = flat[order]
    first = np.ones(len(flat_sorted), dtype=bool)
    first[1:] = flat_sorted[1:] != flat_sorted[:-1]
    winners = order[first]

    vv, uu = np.divmod(flat[winners], width)
    depth[vv, uu] = z[winners]
    color[vv, uu] = colors[winners]
    mask[vv, uu] = True
    return depth, color, mask


def project_orthographic(
    cloud: ColoredPointCloud, cam: OrthoCamera
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Splat a point cloud onto an orthographic pixel grid with a z-buffer.

    Each point lands on the nearest pixel center; when several points share
    a pixel the smallest z wins (ties resolved by input order).  Returns
    (depth, color, mask) where mask marks pixels that received at least one
    point.
    """
    if len(cloud) == 0:
        return _zbuffer_splat(
            np.zeros(0, np.int64), np.zeros(0, np.int64), np.zeros(0),
            np.zeros((0, 3)), cam.height, cam.width,
        )
    pos = cloud.positions
    u = np.rint((pos[:, 0] - cam.origin_x) / cam.pixel_pitch).astype(np.int64)
    v = np.rint((pos[:, 1] - cam.origin_y) / cam.pixel_pitch).astype(np.int64)
    return _zbuffer_splat(u, v, pos[:, 2], cloud.colors, cam.height, cam.width)


def project_perspective(
    cloud: ColoredPointCloud, cam: CameraIntrinsics
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Splat a point cloud through a pinhole with a z-buffer.

    The pixel for (x, y, z) is (x*fx/z + cx, y*fy/z + cy) rounded to the
    nearest center; points with z <= 0 are dropped.  Returns (depth, color,
    mask) like project_orthographic.
    """
    if len(cloud) == 0:
        return _zbuffer_splat(
            np.zeros(0, np.int64), np.zeros(0, np.int64), np.zeros(0),
            np.zeros((0, 3)), cam.height, cam.width,
        )
    pos = cloud.positions
    z = pos[:, 2]
    safe = np.where(z > 0, z, 1.0)
    u = np.rint(pos[:, 0] * cam.fx / safe + cam.cx).astype(np.int64)
    v = np.rint(pos[:, 1] * cam.fy / safe + cam.cy).astype(np.int64)
    return _zbuffer_splat(u, v, z, cloud.colors, cam.height, cam.width)
