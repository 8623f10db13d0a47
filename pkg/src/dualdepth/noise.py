"""Depth-sensor noise: spatially correlated Gaussian bumps on valid pixels.

Each bump is a 2D Gaussian of fixed spatial width whose signed amplitude is
drawn from a zero-mean normal with depth-dependent standard deviation
sigma_z(z) = c0 + c1*z + c2*z^2 (z in meters, result in mm).  Bump centers
are uniform over the valid pixels, so flat regions get smooth, correlated
wobble rather than per-pixel speckle.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from dualdepth.errors import InputError

# Depth below which a noisy pixel is clamped instead of going invalid; the
# valid mask must never change.
_MIN_VALID_MM = 1.0


@dataclass(frozen=True)
class NoiseConfig:
    kernel_sigma_px: float = 3.0
    kernel_density: float = 4.0  # bumps per 1000 valid pixels
    axial_coeffs: tuple[float, float, float] = (1.0, 0.0, 3.0)
    seed: int = 0

    def __post_init__(self):
        if self.kernel_sigma_px <= 0:
            raise InputError("kernel_sigma_px must be positive")
        if self.kernel_density < 0:
            raise InputError("kernel_density must be nonnegative")
        z = np.linspace(0.5, 4.5, 41)
        c0, c1, c2 = self.axial_coeffs
        if np.any(c0 + c1 * z + c2 * z * z <= 0):
            raise InputError("axial sigma must stay positive over 0.5-4.5 m")

    def to_dict(self) -> dict:
        return {
            "kernel_sigma_px": self.kernel_sigma_px,
            "kernel_density": self.kernel_density,
            "axial_coeffs": list(self.axial_coeffs),
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NoiseConfig":
        d = dict(d)
        if "axial_coeffs" in d:
            d["axial_coeffs"] = tuple(float(c) for c in d["axial_coeffs"])
        return cls(**d)


def axial_sigma(z: float | np.ndarray, cfg: NoiseConfig) -> float | np.ndarray:
    """Depth-noise standard deviation in mm at depth z meters."""
    z = np.asarray(z, dtype=np.float64)
    if np.any(z <= 0) or np.any(z > 10):
        raise InputError("axial_sigma expects depth in (0, 10] meters")
    c0, c1, c2 = cfg.axial_coeffs
    out = c0 + c1 * z + c2 * z * z
    return float(out) if out.ndim == 0 else out


def simulate_noise(depth: np.ndarray, cfg: NoiseConfig) -> np.ndarray:
    """Add correlated depth noise; invalid pixels stay invalid, valid stay valid.

    Deterministic given cfg.seed.  The bump count is
    round(kernel_density * valid_pixels / 1000); each bump is truncated at a
    4-sigma window, which drops under 0.04% of its mass.
    """
    depth = np.asarray(depth, dtype=np.float64)
    if depth.ndim != 2:
        raise InputError("depth must be (h,w)")
    valid = depth > 0
    n_valid = int(valid.sum())
    out = depth.copy()
    k = int(round(cfg.kernel_density * n_valid / 1000.0))
    if n_valid == 0 or k == 0:
        return out

    rng = np.random.default_rng(cfg.seed)
    vv, uu = np.nonzero(valid)
    picks = rng.integers(0, n_valid, size=k)
    cv, cu = vv[picks], uu[picks]
    sig_mm = axial_sigma(depth[cv, cu] / 1000.0, cfg)
    amps = rng.normal(0.0, 1.0, size=k) * sig_mm

    h, w = depth.shape
    r = int(np.ceil(4 * cfg.kernel_sigma_px))
    span = np.arange(-r, r + 1, dtype=np.float64)
    profile = np.exp(-np.square(span)[:, None] / (2 * cfg.kernel_sigma_px**2))
    bump = profile * profile.T  # separable 2D Gaussian, peak 1 at the center

    field = np.zeros_like(depth)
    for i in range(k):
        v0, v1 = max(cv[i] - r, 0), min(cv[i] + r + 1, h)
        u0, u1 = max(cu[i] - r, 0), min(cu[i] + r + 1, w)
        bv0 = v0 - (cv[i] - r)
        bu0 = u0 - (cu[i] - r)
        field[v0:v1, u0:u1] += amps[i] * bump[bv0 : bv0 + (v1 - v0), bu0 : bu0 + (u1 - u0)]

    out[valid] = np.maximum(out[valid] + field[valid], _MIN_VALID_MM)
    return out
