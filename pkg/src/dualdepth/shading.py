"""Order-2 spherical-harmonics lighting: fit, render, remove.

A single distant light is modeled by 9 coefficients over the polynomial
basis (1, ny, nz, nx, nx*ny, ny*nz, 3nz^2-1, nx*nz, nx^2-ny^2).  Fitting
assumes uniform gray albedo, so the scene's luma is explained by shading
alone; the albedo/light scale split is fixed separately by normalizing the
shading map to unit mean where a canonical decomposition is needed.
"""

from __future__ import annotations

import numpy as np

from dualdepth.errors import InputError, RankDeficientNormals

#: Lower clamp for rendered shading; keeps the albedo division finite.
SHADING_FLOOR = 1e-3

_LUMA = np.array([0.299, 0.587, 0.114])


def sh_basis(n: np.ndarray) -> np.ndarray:
    """9 basis values for one unit normal."""
    n = np.asarray(n, dtype=np.float64)
    if n.shape != (3,):
        raise InputError("sh_basis expects a single 3-vector")
    if abs(np.linalg.norm(n) - 1.0) > 1e-4:
        raise InputError(f"sh_basis needs a unit vector, got length {np.linalg.norm(n):.6f}")
    return _basis_rows(n[None, :])[0]


def _basis_rows(n: np.ndarray) -> np.ndarray:
    """(k, 9) basis matrix for (k, 3) unit normals; no validation."""
    nx, ny, nz = n[:, 0], n[:, 1], n[:, 2]
    return np.stack(
        [
            np.ones_like(nx),
            ny,
            nz,
            nx,
            nx * ny,
            ny * nz,
            3 * nz * nz - 1,
            nx * nz,
            nx * nx - ny * ny,
        ],
        axis=1,
    )


def estimate_sh(color: np.ndarray, normals: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Least-squares light coefficients explaining luma(color) as shading.

    Returns the unnormalized minimizer.  Raises when fewer than 9 usable
    pixels exist or the normal distribution does not span the basis.
    """
    color = np.asarray(color, dtype=np.float64)
    normals = np.asarray(normals, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    if color.shape[:2] != mask.shape or normals.shape != mask.shape + (3,):
        raise InputError("color, normals and mask dimensions must agree")

    unit = np.abs(np.linalg.norm(normals, axis=2) - 1.0) < 1e-3
    use = mask & unit
    k = int(use.sum())
    if k < 9:
        raise InputError(f"need at least 9 valid unit-normal pixels, have {k}")

    a = _basis_rows(normals[use])
    y = color[use] @ _LUMA
    coeffs, _, rank, _ = np.linalg.lstsq(a, y, rcond=1e-8)
    if rank < 9:
        raise RankDeficientNormals(
            f"normal distribution spans only {rank}/9 light modes; "
            "vary the surface orientations"
        )
    return coeffs


def render_shading(normals: np.ndarray, coeffs: np.ndarray) -> np.ndarray:
    """Per-pixel shading from a normal map; invalid (zero) normals give 0."""
    normals = np.asarray(normals, dtype=np.float64)
    coeffs = np.asarray(coeffs, dtype=np.float64)
    if normals.ndim != 3 or normals.shape[2] != 3:
        raise InputError("normal map must be (h,w,3)")
    if coeffs.shape != (9,):
        raise InputError("expected 9 light coefficients")
    valid = np.linalg.norm(normals, axis=2) > 0.5
    out = np.zeros(normals.shape[:2], dtype=np.float64)
    if valid.any():
        rows = _basis_rows(normals[valid])
        out[valid] = np.maximum(rows @ coeffs, SHADING_FLOOR)
    return out


def normalize_shading(shading: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Rescale shading to unit mean over the mask (canonical albedo split)."""
    shading = np.asarray(shading, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise InputError("cannot normalize shading over an empty mask")
    mean = float(shading[mask].mean())
    if mean <= 0:
        raise InputError("mean shading must be positive to normalize")
    out = shading / mean
    out[mask] = np.maximum(out[mask], SHADING_FLOOR)
    return out


def remove_shading(color: np.ndarray, shading: np.ndarray) -> np.ndarray:
    """Albedo = clamp(color / shading, 0, 1) where shading is valid."""
    color = np.asarray(color, dtype=np.float64)
    shading = np.asarray(shading, dtype=np.float64)
    if color.ndim != 3 or color.shape[2] != 3 or color.shape[:2] != shading.shape:
        raise InputError("color must be (h,w,3) with matching shading map")
    out = np.zeros_like(color)
    valid = shading > 0
    out[valid] = np.clip(color[valid] / shading[valid][:, None], 0.0, 1.0)
    return out
