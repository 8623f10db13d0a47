"""Perspective and orthographic camera models.

Conventions: the camera looks along +z, depth is positive millimeters,
image u grows to the right and v grows downward.  Perspective pixels map
to rays through the pinhole; orthographic pixels map to a regular world
grid with a fixed millimeter pitch.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from dualdepth.errors import InputError


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole model: x = (u - cx) * z / fx, y = (v - cy) * z / fy."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise InputError(f"focal lengths must be positive, got fx={self.fx}, fy={self.fy}")
        if not (0 <= self.cx < self.width) or not (0 <= self.cy < self.height):
            raise InputError(
                f"principal point ({self.cx}, {self.cy}) outside {self.width}x{self.height} image"
            )

    def to_dict(self) -> dict:
        return {
            "fx": self.fx,
            "fy": self.fy,
            "cx": self.cx,
            "cy": self.cy,
            "width": self.width,
            "height": self.height,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CameraIntrinsics":
        return cls(**d)


@dataclass(frozen=True)
class OrthoCamera:
    """Orthographic model: pixel (u, v) sits at world
    (origin_x + u * pixel_pitch, origin_y + v * pixel_pitch), depth = z."""

    pixel_pitch: float
    origin_x: float
    origin_y: float
    width: int
    height: int

    def __post_init__(self):
        if self.pixel_pitch <= 0:
            raise InputError(f"pixel_pitch must be positive, got {self.pixel_pitch}")

    def pixel_grid(self) -> tuple[np.ndarray, np.ndarray]:
        """World x/y coordinates of every pixel center, each (height, width)."""
        u = np.arange(self.width, dtype=np.float64)
        v = np.arange(self.height, dtype=np.float64)
        x = self.origin_x + u * self.pixel_pitch
        y = self.origin_y + v * self.pixel_pitch
        return np.broadcast_to(x, (self.height, self.width)), np.broadcast_to(
            y[:, None], (self.height, self.width)
        )

    def to_dict(self) -> dict:
        return {
            "pixel_pitch": self.pixel_pitch,
            "origin_x": self.origin_x,
            "origin_y": self.origin_y,
            "width": self.width,
            "height": self.height,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "OrthoCamera":
        return cls(**d)


def fit_ortho_camera(
    positions: np.ndarray, width: int, height: int, coverage: float = 0.9
) -> OrthoCamera:
    """Center an orthographic camera on a point cloud's bounding box.

    The pitch is chosen so the cloud spans `coverage` of the limiting image
    dimension.  `positions` is (n, 3) in millimeters.
    """
    positions = np.asarray(positions, dtype=np.float64)
    if positions.ndim != 2 or positions.shape[1] != 3 or positions.shape[0] == 0:
        raise InputError(f"expected a nonempty (n, 3) position array, got shape {positions.shape}")
    if not (0 < coverage <= 1):
        raise InputError(f"coverage must be in (0, 1], got {coverage}")
    lo = positions[:, :2].min(axis=0)
    hi = positions[:, :2].max(axis=0)
    extent = hi - lo
    pitch = max(
        extent[0] / (coverage * max(width - 1, 1)),
        extent[1] / (coverage * max(height - 1, 1)),
        1e-6,
    )
    center = (lo + hi) / 2.0
    origin_x = center[0] - (width - 1) / 2.0 * pitch
    origin_y = center[1] - (height - 1) / 2.0 * pitch
    return OrthoCamera(
        pixel_pitch=float(pitch),
        origin_x=float(origin_x),
        origin_y=float(origin_y),
        width=width,
        height=height,
    )
