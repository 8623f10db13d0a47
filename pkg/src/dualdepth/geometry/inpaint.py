"""Diffusion fill for holes inside a silhouette.

A hole is an invalid region not connected to the image border; everything
connected to the border is background and stays invalid.  Filling runs
Jacobi-style neighbor averaging: trusted pixels keep their value, hole
pixels repeatedly take the mean of their known 4-neighbors until values
have propagated and smoothed.
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from dualdepth.errors import InputError


def interior_holes(mask: np.ndarray) -> np.ndarray:
    """Invalid pixels enclosed by the valid region (4-connected flood fill)."""
    mask = np.asarray(mask, dtype=bool)
    inv = ~mask
    labels, count = ndimage.label(inv)
    if count == 0:
        return np.zeros_like(mask)
    border = np.concatenate(
        [labels[0, :], labels[-1, :], labels[:, 0], labels[:, -1]]
    )
    border_ids = np.unique(border[border > 0])
    return inv & ~np.isin(labels, border_ids)


def inpaint_holes(
    depth: np.ndarray, mask: np.ndarray, iterations: int = 256
) -> np.ndarray:
    """Fill interior holes of `depth` by iterative neighbor averaging.

    `mask` marks the pixels whose values are trusted; they are returned
    unchanged.  Works on (h, w) images and (h, w, c) stacks alike.  Pixels
    outside the silhouette (background) are left at zero.
    """
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise InputError("cannot inpaint a fully invalid image")
    values = np.asarray(depth, dtype=np.float64)
    if values.shape[:2] != mask.shape:
        raise InputError(f"image shape {values.shape} does not match mask {mask.shape}")

    holes = interior_holes(mask)
    out = np.zeros_like(values)
    out[mask] = values[mask]
    if not holes.any():
        return out

    h, w = mask.shape
    work = out.reshape(h, w, -1)
    known = mask.copy()
    for _ in range(iterations):
        acc = np.zeros_like(work)
        cnt = np.zeros((h, w), dtype=np.float64)
        for dv, du in ((0, 1), (0, -1), (1, 0), (-1, 0)):
            src_v = slice(max(dv, 0), h + min(dv, 0))
            src_u = slice(max(du, 0), w + min(du, 0))
            dst_v = slice(max(-dv, 0), h + min(-dv, 0))
            dst_u = slice(max(-du, 0), w + min(-du, 0))
            k = known[src_v, src_u]
            acc[dst_v, dst_u] += work[src_v, src_u] * k[..., None]
            cnt[dst_v, dst_u] += k
        update = holes & (cnt > 0)
        if not update.any():
            break
        work[update] = acc[update] / cnt[update][..., None]
        known |= update

    # Trusted pixels must survive bit-exactly; unreached holes stay zero.
    out = work.reshape(values.shape)
    out[mask] = values[mask]
    return out
