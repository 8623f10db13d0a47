"""Depth-accuracy and normal-smoothness metrics."""

from __future__ import annotations

import numpy as np

from dualdepth.errors import InputError


def depth_error(
    pred: np.ndarray, gt: np.ndarray, mask: np.ndarray
) -> tuple[float, float]:
    """Mean absolute and root-mean-square depth error (mm) over a mask."""
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    if pred.shape != gt.shape or pred.shape != mask.shape:
        raise InputError("pred, gt and mask shapes must agree")
    if not mask.any():
        raise InputError("depth_error needs at least one masked pixel")
    diff = pred[mask] - gt[mask]
    mae = float(np.mean(np.abs(diff)))
    rmse = float(np.sqrt(np.mean(np.square(diff))))
    return mae, rmse


def normal_gradient_energy(normals: np.ndarray, valid: np.ndarray) -> float:
    """Mean squared finite-difference of a normal map over valid pixel pairs.

    Measures high-frequency content: higher means more fine-grained
    orientation changes.  The average runs over all horizontally and
    vertically adjacent pixel pairs that are both valid; zero if no such
    pair exists.
    """
    normals = np.asarray(normals, dtype=np.float64)
    valid = np.asarray(valid, dtype=bool)
    if normals.ndim != 3 or normals.shape[2] != 3 or normals.shape[:2] != valid.shape:
        raise InputError("normals must be (h,w,3) with a matching (h,w) valid mask")

    total = 0.0
    count = 0
    dh = normals[:, 1:] - normals[:, :-1]
    okh = valid[:, 1:] & valid[:, :-1]
    total += float(np.sum(np.square(dh[okh])))
    count += int(np.sum(okh))
    dv = normals[1:, :] - normals[:-1, :]
    okv = valid[1:, :] & valid[:-1, :]
    total += float(np.sum(np.square(dv[okv])))
    count += int(np.sum(okv))
    if count == 0:
        return 0.0
    return total / count
