"""On-disk formats for depth, color, normal and shading rasters, plus OBJ.

Conventions:
  depth    16-bit grayscale PNG, value = millimeters, 0 = invalid
  color    8-bit RGB PNG
  normals  16-bit 3-channel PNG, channel value = (n+1)/2 * 65535 per axis
  shading  16-bit grayscale PNG, value = shading * 10000
  mesh     Wavefront OBJ, vertex colors inline as "v x y z r g b", mm units

Normal maps are quantized on disk, so invalid (zero) normals do not survive
a round trip exactly; validity always comes from the paired depth file.
"""

from __future__ import annotations

from pathlib import Path

import cv2
import numpy as np

from dualdepth.errors import InputError
from dualdepth.geometry.meshing import TriangleMesh


def _read_png(path: str | Path, flags: int) -> np.ndarray:
    img = cv2.imread(str(path), flags)
    if img is None:
        raise InputError(f"cannot read image {path}")
    return img


def write_depth_png(path: str | Path, depth: np.ndarray) -> None:
    arr = np.rint(np.clip(np.asarray(depth, dtype=np.float64), 0, 65535)).astype(np.uint16)
    if not cv2.imwrite(str(path), arr):
        raise InputError(f"cannot write image {path}")


def read_depth_png(path: str | Path) -> np.ndarray:
    img = _read_png(path, cv2.IMREAD_UNCHANGED)
    if img.ndim != 2:
        raise InputError(f"{path} is not single-channel depth")
    return img.astype(np.float64)


def write_color_png(path: str | Path, color: np.ndarray) -> None:
    arr = np.rint(np.clip(np.asarray(color, dtype=np.float64), 0, 1) * 255).astype(np.uint8)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise InputError("color image must be (h,w,3)")
    if not cv2.imwrite(str(path), arr[:, :, ::-1]):
        raise InputError(f"cannot write image {path}")


def read_color_png(path: str | Path) -> np.ndarray:
    img = _read_png(path, cv2.IMREAD_COLOR)
    return img[:, :, ::-1].astype(np.float64) / 255.0


def write_normals_png(path: str | Path, normals: np.ndarray) -> None:
    n = np.asarray(normals, dtype=np.float64)
    if n.ndim != 3 or n.shape[2] != 3:
        raise InputError("normal map must be (h,w,3)")
    arr = np.rint(np.clip((n + 1.0) / 2.0, 0, 1) * 65535).astype(np.uint16)
    if not cv2.imwrite(str(path), arr[:, :, ::-1]):
        raise InputError(f"cannot write image {path}")


def read_normals_png(path: str | Path) -> np.ndarray:
    img = _read_png(path, cv2.IMREAD_UNCHANGED)
    if img.ndim != 3 or img.shape[2] != 3 or img.dtype != np.uint16:
        raise InputError(f"{path} is not a 16-bit 3-channel normal map")
    return img[:, :, ::-1].astype(np.float64) / 65535.0 * 2.0 - 1.0


def write_shading_png(path: str | Path, shading: np.ndarray) -> None:
    arr = np.rint(np.clip(np.asarray(shading, dtype=np.float64), 0, 6.5535) * 10000)
    if not cv2.imwrite(str(path), arr.astype(np.uint16)):
        raise InputError(f"cannot write image {path}")


def read_shading_png(path: str | Path) -> np.ndarray:
    img = _read_png(path, cv2.IMREAD_UNCHANGED)
    if img.ndim != 2:
        raise InputError(f"{path} is not single-channel shading")
    return img.astype(np.float64) / 10000.0


def write_obj(path: str | Path, mesh: TriangleMesh) -> None:
    """OBJ with per-vertex colors appended to each position line."""
    lines = []
    for (x, y, z), (r, g, b) in zip(mesh.vertices, mesh.colors):
        lines.append(f"v {x:.4f} {y:.4f} {z:.4f} {r:.6f} {g:.6f} {b:.6f}")
    for a, b_, c in mesh.faces + 1:  # OBJ indices are 1-based
        lines.append(f"f {a} {b_} {c}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_obj(path: str | Path) -> TriangleMesh:
    vertices, colors, faces = [], [], []
    for line in Path(path).read_text().splitlines():
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "v":
            vals = [float(p) for p in parts[1:]]
            if len(vals) not in (3, 6):
                raise InputError(f"malformed vertex line in {path}: {line!r}")
            vertices.append(vals[:3])
            colors.append(vals[3:] if len(vals) == 6 else [0.0, 0.0, 0.0])
        elif parts[0] == "f":
            idx = [int(p.split("/")[0]) - 1 for p in parts[1:]]
            if len(idx) != 3:
                raise InputError(f"only triangle faces supported, got {line!r}")
            faces.append(idx)
    return TriangleMesh(
        vertices=np.asarray(vertices, dtype=np.float64).reshape(-1, 3),
        colors=np.asarray(colors, dtype=np.float64).reshape(-1, 3),
        faces=np.asarray(faces, dtype=np.int64).reshape(-1, 3),
    )
