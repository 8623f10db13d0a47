"""Watertight meshing of a front/back depth-map pair.

Both maps must share one silhouette with the back surface behind the front
one.  Each sheet is triangulated over its 2x2 valid quads (front faces -z,
back faces +z).  The open rims of the two sheets are then bridged: every
boundary pixel receives three vertices interpolated between its front and
back points, and each rim edge becomes a ladder of four quads running
front -> 1/4 -> 1/2 -> 3/4 -> back.  Rim edges are recovered from the
triangulation itself (directed edges without a reverse partner), so the
wall follows any holes opened by the depth-discontinuity guard and the
result stays closed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from dualdepth.errors import InputError
from dualdepth.geometry.cameras import OrthoCamera


@dataclass(frozen=True)
class TriangleMesh:
    """Indexed triangles with per-vertex positions (mm) and RGB colors."""

    vertices: np.ndarray  # (v, 3) float64
    colors: np.ndarray  # (v, 3) float64
    faces: np.ndarray  # (f, 3) int64

    def __post_init__(self):
        nv = self.vertices.shape[0]
        if self.vertices.shape != (nv, 3) or self.colors.shape != (nv, 3):
            raise InputError("vertices and colors must both be (v,3)")
        if self.faces.ndim != 2 or self.faces.shape[1] != 3:
            raise InputError("faces must be (f,3)")
        if self.faces.size and (self.faces.min() < 0 or self.faces.max() >= nv):
            raise InputError("face indices out of range")

    @property
    def num_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def num_faces(self) -> int:
        return self.faces.shape[0]

    def signed_volume(self) -> float:
        """Divergence-theorem volume; positive for outward-wound closed meshes."""
        a = self.vertices[self.faces[:, 0]]
        b = self.vertices[self.faces[:, 1]]
        c = self.vertices[self.faces[:, 2]]
        return float(np.einsum("ij,ij->i", a, np.cross(b, c)).sum() / 6.0)


def _sheet_faces(ok_quad: np.ndarray, index: np.ndarray, mirror: bool) -> np.ndarray:
    """Two triangles per surviving quad; `mirror` flips the winding."""
    qv, qu = np.nonzero(ok_quad)
    i00 = index[qv, qu]
    i01 = index[qv, qu + 1]
    i10 = index[qv + 1, qu]
    i11 = index[qv + 1, qu + 1]
    if mirror:
        tris = [(i00, i01, i11), (i00, i11, i10)]
    else:
        tris = [(i00, i11, i01), (i00, i10, i11)]
    return np.concatenate([np.stack(t, axis=1) for t in tris], axis=0).astype(np.int64)


def _rim_edges(faces: np.ndarray) -> np.ndarray:
    """Directed edges of `faces` whose reverse edge is absent, as (r, 2)."""
    if faces.size == 0:
        return np.zeros((0, 2), dtype=np.int64)
    edges = faces[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2)
    hi = int(edges.max()) + 1
    keys = edges[:, 0] * hi + edges[:, 1]
    rev = edges[:, 1] * hi + edges[:, 0]
    open_mask = ~np.isin(keys, rev, assume_unique=False)
    return edges[open_mask]


def build_mesh(
    d_front: np.ndarray,
    d_back: np.ndarray,
    c_front: np.ndarray,
    c_back: np.ndarray,
    cam: OrthoCamera,
    max_depth_jump: float = 50.0,
) -> TriangleMesh:
    """Close a front/back orthographic depth pair into one triangle mesh.

    Preconditions: both depth maps valid on exactly the same pixels, and
    d_back >= d_front on every valid pixel.  Quads whose corner depths span
    more than `max_depth_jump` mm on either sheet are dropped from both
    sheets, keeping the two rims congruent.
    """
    d_front = np.asarray(d_front, dtype=np.float64)
    d_back = np.asarray(d_back, dtype=np.float64)
    c_front = np.asarray(c_front, dtype=np.float64)
    c_back = np.asarray(c_back, dtype=np.float64)
    h, w = cam.height, cam.width
    for name, arr, shape in (
        ("d_front", d_front, (h, w)),
        ("d_back", d_back, (h, w)),
        ("c_front", c_front, (h, w, 3)),
        ("c_back", c_back, (h, w, 3)),
    ):
        if arr.shape != shape:
            raise InputError(f"{name} shape {arr.shape} does not match camera, expected {shape}")

    mask = d_front > 0
    if not np.array_equal(mask, d_back > 0):
        raise InputError("front and back depth maps must share one silhouette")
    behind = d_back < d_front
    if behind.any():
        n_bad = int(behind.sum())
        worst = float((d_front - d_back)[behind].max())
        raise InputError(
            f"back surface in front of front surface on {n_bad} pixels (worst {worst:.3f} mm)"
        )

    empty = TriangleMesh(
        vertices=np.zeros((0, 3)), colors=np.zeros((0, 3)), faces=np.zeros((0, 3), dtype=np.int64)
    )
    nv = int(mask.sum())
    if nv == 0:
        return empty

    gx, gy = cam.pixel_grid()
    index = np.full((h, w), -1, dtype=np.int64)
    index[mask] = np.arange(nv)
    front_pts = np.stack([gx[mask], gy[mask], d_front[mask]], axis=1)
    back_pts = np.stack([gx[mask], gy[mask], d_back[mask]], axis=1)

    quad_valid = mask[:-1, :-1] & mask[:-1, 1:] & mask[1:, :-1] & mask[1:, 1:]

    def quad_jump_ok(d: np.ndarray) -> np.ndarray:
        corners = np.stack([d[:-1, :-1], d[:-1, 1:], d[1:, :-1], d[1:, 1:]])
        return corners.max(axis=0) - corners.min(axis=0) <= max_depth_jump

    ok_quad = quad_valid & quad_jump_ok(d_front) & quad_jump_ok(d_back)
    front_faces = _sheet_faces(ok_quad, index, mirror=False)
    back_faces = _sheet_faces(ok_quad, index, mirror=True) + nv
    if front_faces.size == 0:
        return empty

    rim = _rim_edges(front_faces)  # directed (a, b) in front-vertex ids

    # Three interpolated vertices per rim pixel, at t = 1/4, 1/2, 3/4 of the
    # front-to-back segment.
    rim_pixels = np.unique(rim)
    ts = np.array([0.25, 0.5, 0.75])
    interp_pts = (
        front_pts[rim_pixels, None, :] * (1 - ts)[None, :, None]
        + back_pts[rim_pixels, None, :] * ts[None, :, None]
    ).reshape(-1, 3)

    fc = c_front[mask]
    bc = c_back[mask]
    interp_cols = (
        fc[rim_pixels, None, :] * (1 - ts)[None, :, None]
        + bc[rim_pixels, None, :] * ts[None, :, None]
    ).reshape(-1, 3)

    # Vertex id layout: [front 0..nv) [back nv..2nv) [interp 2nv..2nv+3r)
    interp_base = 2 * nv
    rank = np.searchsorted(rim_pixels, rim)  # (r_edges, 2) ranks of a and b

    def column(level: int, which: int) -> np.ndarray:
        """Vertex ids of rim endpoints at a wall level: 0=front, 1..3=interp, 4=back."""
        pix = rim[:, which]
        if level == 0:
            return pix
        if level == 4:
            return pix + nv
        return interp_base + rank[:, which] * 3 + (level - 1)

    wall = []
    for level in range(4):
        top_a, top_b = column(level, 0), column(level, 1)
        bot_a, bot_b = column(level + 1, 0), column(level + 1, 1)
        # Quad (top_b, top_a, bot_a, bot_b) -> two outward triangles.
        wall.append(np.stack([top_b, top_a, bot_a], axis=1))
        wall.append(np.stack([top_b, bot_a, bot_b], axis=1))
    wall_faces = np.concatenate(wall, axis=0) if rim.size else np.zeros((0, 3), dtype=np.int64)

    all_vertices = np.concatenate([front_pts, back_pts, interp_pts], axis=0)
    all_colors = np.concatenate([fc, bc, interp_cols], axis=0)
    all_faces = np.concatenate([front_faces, back_faces, wall_faces], axis=0)

    used = np.unique(all_faces)
    remap = np.full(all_vertices.shape[0], -1, dtype=np.int64)
    remap[used] = np.arange(used.shape[0])
    return TriangleMesh(
        vertices=all_vertices[used], colors=all_colors[used], faces=remap[all_faces]
    )
