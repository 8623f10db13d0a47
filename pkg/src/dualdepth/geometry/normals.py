"""Surface normals from a gridded point cloud or a depth map.

The estimator averages normalized cross products over the four
clockwise-consecutive 4-neighbor pairs of each pixel: (right, up),
(up, left), (left, down), (down, right).  Pairs that straddle a depth
discontinuity or a hole contribute nothing; a pixel with no usable pair
gets the zero vector.
"""

from __future__ import annotations

import numpy as np

from dualdepth.errors import InputError
from dualdepth.geometry.cameras import CameraIntrinsics, OrthoCamera

# Neighbor offsets (dv, du) in image coordinates (v grows downward).
_RIGHT = (0, 1)
_UP = (-1, 0)
_LEFT = (0, -1)
_DOWN = (1, 0)
_PAIRS = ((_RIGHT, _UP), (_UP, _LEFT), (_LEFT, _DOWN), (_DOWN, _RIGHT))


def _shifted(arr: np.ndarray, dv: int, du: int) -> np.ndarray:
    """out[v, u] = arr[v+dv, u+du], zero-filled outside the frame."""
    out = np.zeros_like(arr)
    h, w = arr.shape[:2]
    src_v = slice(max(dv, 0), h + min(dv, 0))
    src_u = slice(max(du, 0), w + min(du, 0))
    dst_v = slice(max(-dv, 0), h + min(-dv, 0))
    dst_u = slice(max(-du, 0), w + min(-du, 0))
    out[dst_v, dst_u] = arr[src_v, src_u]
    return out


def normals_from_point_grid(
    points: np.ndarray, valid: np.ndarray, max_step: float | np.ndarray | None = None
) -> np.ndarray:
    """Cross-product normals on a (h, w, 3) point grid.

    `max_step` bounds the Euclidean length of any neighbor edge used; longer
    edges are treated as holes.  It may be a scalar or a per-pixel (h, w)
    array.  No orientation is imposed, which keeps the map exactly
    equivariant under rotations of the input points.
    """
    points = np.asarray(points, dtype=np.float64)
    valid = np.asarray(valid, dtype=bool)
    if points.ndim != 3 or points.shape[2] != 3 or valid.shape != points.shape[:2]:
        raise InputError("points must be (h,w,3) with a matching (h,w) valid mask")

    deltas = {}
    edge_ok = {}
    for off in (_RIGHT, _UP, _LEFT, _DOWN):
        nb = _shifted(points, *off)
        nb_valid = _shifted(valid, *off)
        d = nb - points
        ok = valid & nb_valid
        if max_step is not None:
            step2 = np.einsum("hwc,hwc->hw", d, d)
            ok &= step2 <= np.square(max_step)
        deltas[off] = d
        edge_ok[off] = ok

    acc = np.zeros_like(points)
    for j, k in _PAIRS:
        cross = np.cross(deltas[j], deltas[k])
        norm = np.linalg.norm(cross, axis=2)
        ok = edge_ok[j] & edge_ok[k] & (norm > 0)
        safe = np.where(norm > 0, norm, 1.0)
        acc += np.where(ok[..., None], cross / safe[..., None], 0.0)

    total = np.linalg.norm(acc, axis=2)
    has = total > 1e-12
    out = np.where(has[..., None], acc / np.where(has, total, 1.0)[..., None], 0.0)
    return out


def compute_normals(
    depth: np.ndarray,
    cam: OrthoCamera | CameraIntrinsics,
    max_depth_jump: float = 50.0,
) -> np.ndarray:
    """Camera-facing normal map of a depth image.

    Neighbor edges whose depth difference exceeds `max_depth_jump` (mm) are
    skipped, so normals never bridge occlusion boundaries.  Output normals
    satisfy n_z <= 0 (the camera looks along +z); invalid pixels are zero.
    """
    depth = np.asarray(depth, dtype=np.float64)
    if depth.shape != (cam.height, cam.width):
        raise InputError(f"depth shape {depth.shape} does not match camera {cam.height}x{cam.width}")
    valid = depth > 0

    if isinstance(cam, OrthoCamera):
        gx, gy = cam.pixel_grid()
        points = np.stack([gx, gy, depth], axis=2)
        footprint = cam.pixel_pitch
    else:
        u = np.arange(cam.width, dtype=np.float64)[None, :]
        v = np.arange(cam.height, dtype=np.float64)[:, None]
        points = np.stack(
            [(u - cam.cx) * depth / cam.fx, (v - cam.cy) * depth / cam.fy, depth], axis=2
        )
        # Local pixel footprint in mm; loose on purpose, the guard only has
        # to reject occlusion-scale jumps.
        footprint = depth * max(1.0 / cam.fx, 1.0 / cam.fy)

    # An edge of in-plane footprint f and depth change dz has length
    # hypot(f, dz), so this threshold rejects |dz| > max_depth_jump.
    max_step = np.hypot(max_depth_jump, footprint)
    normals = normals_from_point_grid(points, valid, max_step=max_step)
    flip = normals[..., 2] > 0
    normals[flip] *= -1.0
    return normals
